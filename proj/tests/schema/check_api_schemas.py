#!/usr/bin/env python3
"""Starts `medqa serve --offline` and validates every endpoint's JSON against docs/schemas."""

import json
import pathlib
import re
import subprocess
import sys
import urllib.error
import urllib.request

import jsonschema

VITAMIN = "Does vitamin C alleviate colds?"


def load_defs(schema_dir):
    defs = {}
    for path in sorted(pathlib.Path(schema_dir).glob("*.json")):
        defs.update(json.loads(path.read_text())["$defs"])
    return defs


class Client:
    def __init__(self, port):
        self.base = f"http://127.0.0.1:{port}"

    def call(self, method, path, body=None, token=None):
        data = None if body is None else json.dumps(body).encode()
        req = urllib.request.Request(self.base + path, data=data, method=method)
        req.add_header("Content-Type", "application/json")
        if token:
            req.add_header("Authorization", f"Bearer {token}")
        try:
            with urllib.request.urlopen(req, timeout=30) as resp:
                return resp.status, json.loads(resp.read() or b"null"), dict(resp.headers)
        except urllib.error.HTTPError as err:
            return err.code, json.loads(err.read() or b"null"), dict(err.headers)


class Checks:
    def __init__(self, defs):
        self.defs = defs
        self.failures = []
        self.count = 0

    def expect(self, label, status, body, want_status, schema):
        self.count += 1
        problems = []
        if status != want_status:
            problems.append(f"status {status}, want {want_status}")
        validator = jsonschema.Draft202012Validator({"$defs": self.defs, "$ref": f"#/$defs/{schema}"})
        problems += [f"{'/'.join(map(str, e.absolute_path)) or '$'}: {e.message}" for e in validator.iter_errors(body)]
        if problems:
            self.failures.append(f"{label}: " + "; ".join(problems))
        print(("ok   " if not problems else "FAIL ") + label)


def main():
    binary, schema_dir = sys.argv[1], sys.argv[2]
    defs = load_defs(schema_dir)
    server = subprocess.Popen([binary, "serve", "--offline", "--port", "0"], stdout=subprocess.PIPE, text=True)
    try:
        line = server.stdout.readline()
        match = re.search(r"listening on port (\d+)", line)
        if not match:
            print(f"server did not start: {line!r}")
            return 1
        api = Client(int(match.group(1)))
        c = Checks(defs)

        status, body, headers = api.call("GET", "/api/health")
        c.expect("health", status, body, 200, "health")
        if any(k.endswith("_key") and not isinstance(v, bool) for k, v in body.get("config", {}).items()):
            c.failures.append("health exposes a key value")

        status, body, _ = api.call("POST", "/api/auth/register", {"display_name": "schema", "password": "password1"})
        c.expect("register", status, body, 201, "auth")
        status, body, _ = api.call("POST", "/api/auth/login", {"display_name": "schema", "password": "password1"})
        c.expect("login", status, body, 200, "auth")
        token = body.get("token")
        status, body, _ = api.call("POST", "/api/auth/login", {"display_name": "schema", "password": "wrong pass"})
        c.expect("login rejected", status, body, 401, "error")

        status, body, _ = api.call("POST", "/api/searches", {"question": VITAMIN})
        c.expect("anonymous search", status, body, 200, "search")
        if body.get("persisted") is not False:
            c.failures.append("anonymous search persisted")
        status, body, _ = api.call("POST", "/api/searches", {"question": VITAMIN}, token)
        c.expect("signed-in search", status, body, 200, "search")
        session_id = body.get("session_id")
        pmid = body["selected"][0]["pmid"] if body.get("selected") else "1"

        status, body, _ = api.call("POST", "/api/searches", {"question": "Do purple giraffes cure hiccups?"})
        c.expect("no-evidence search", status, body, 200, "search")
        status, body, _ = api.call("POST", "/api/searches", {"question": " "})
        c.expect("empty question", status, body, 400, "error")

        status, body, _ = api.call("GET", f"/api/documents/{pmid}", token=token)
        c.expect("document", status, body, 200, "document")
        status, body, _ = api.call("GET", "/api/documents/123", token=token)
        c.expect("unknown document", status, body, 404, "error")
        status, body, _ = api.call("PUT", f"/api/documents/{pmid}/notes", {"text": "dose?"}, token)
        c.expect("put note", status, body, 200, "note")
        status, body, _ = api.call("GET", f"/api/documents/{pmid}/notes", token=token)
        c.expect("get note", status, body, 200, "note")

        status, body, _ = api.call("GET", "/api/history?page=1", token=token)
        c.expect("history page", status, body, 200, "history_page")
        status, body, _ = api.call("GET", f"/api/history/{session_id}", token=token)
        c.expect("history session", status, body, 200, "session")
        status, body, _ = api.call("GET", "/api/history")
        c.expect("history without token", status, body, 401, "error")

        status, body, _ = api.call("POST", "/api/folders", {"name": "colds"}, token)
        c.expect("create folder", status, body, 201, "folder")
        folder_id = body.get("folder_id")
        status, body, _ = api.call("PUT", f"/api/folders/{folder_id}/sessions/{session_id}", token=token)
        c.expect("assign folder", status, body, 200, "folder")
        status, body, _ = api.call("GET", "/api/folders", token=token)
        c.expect("list folders", status, body, 200, "folders")

        status, body, _ = api.call("GET", "/api/topics?limit=5", token=token)
        c.expect("topics", status, body, 200, "topics")

        status, body, _ = api.call("DELETE", "/api/history", token=token)
        c.expect("delete history", status, body, 200, "history_deleted")
        status, body, _ = api.call("GET", "/api/history", token=token)
        c.expect("history after delete", status, body, 200, "history_page")
        if body.get("total") != 0:
            c.failures.append("history not empty after delete")

        status, body, _ = api.call("GET", "/api/nowhere")
        c.expect("unknown route", status, body, 404, "error")

        for failure in c.failures:
            print("FAIL " + failure)
        print(f"{c.count - len(c.failures)}/{c.count} response checks passed")
        return 1 if c.failures else 0
    finally:
        server.terminate()
        server.wait(timeout=10)


if __name__ == "__main__":
    sys.exit(main())
