#!/usr/bin/env python3
"""Writes the offline fixture tree used by tests and `medqa --offline`.

Every record is synthetic: PMIDs sit in the 99xxxxxx range, which PubMed has
not assigned, and titles/abstracts are generated from sentence templates.
The output is deterministic; rerun after editing and commit the result.

    python3 tools/fixtures/generate_pubmed_fixtures.py fixtures
"""

import json
import random
import sys
from pathlib import Path
from xml.sax.saxutils import escape

VITAMIN_QUERY = (
    'vitamin C AND alleviate AND colds AND '
    '("journal article"[Publication Type] OR "review"[Publication Type])'
)
CARDIAC_QUERY = (
    'predictors AND poor AND surgical AND outcomes AND elderly AND cardiac AND surgery AND '
    'patients AND ("journal article"[Publication Type] OR "review"[Publication Type])'
)

JOURNALS = [
    "The Lancet", "BMJ", "JAMA", "Journal of Infectious Diseases", "Nutrients",
    "American Journal of Clinical Nutrition", "Cochrane Database of Systematic Reviews",
    "European Journal of Clinical Nutrition", "Journal of Family Practice", "Respiratory Medicine",
]
CARDIAC_JOURNALS = [
    "Annals of Thoracic Surgery", "Journal of Thoracic and Cardiovascular Surgery",
    "European Journal of Cardio-Thoracic Surgery", "Journal of the American Geriatrics Society",
]

POPULATIONS = [
    "healthy adults", "university students", "marathon runners", "schoolchildren",
    "older adults in residential care", "military recruits", "office workers",
    "adolescent athletes", "pregnant women", "smokers",
]
DOSES = ["200 mg", "500 mg", "1 g", "2 g", "3 g", "8 g"]
DESIGNS = [
    "a randomized, double-blind, placebo-controlled trial",
    "a prospective cohort study",
    "a crossover trial",
    "a pragmatic randomized trial",
    "a case-control study",
]

SUPPORT = [
    "Supplementation with vitamin C reduced the mean duration of cold episodes by {pct}% compared with placebo.",
    "Participants receiving vitamin C reported shorter colds and a reduction in symptom severity.",
    "The incidence of common colds was significantly lower in the vitamin C group (RR {rr}; 95% CI {lo}-{hi}).",
    "Vitamin C shortened the duration of upper respiratory symptoms by {days} days on average.",
    "Regular intake of vitamin C improved recovery time after the onset of cold symptoms.",
]
REFUTE = [
    "Vitamin C did not reduce the incidence of colds in this population (RR {rr}; 95% CI {lo}-{hi}).",
    "There was no significant difference in cold duration between the vitamin C and placebo groups.",
    "Therapeutic doses taken after symptom onset had no effect on the severity of colds.",
    "Supplementation failed to prevent respiratory infections over the {weeks}-week follow-up.",
    "Vitamin C was not associated with fewer sick days among participants.",
]
NEUTRAL = [
    "Plasma ascorbate concentrations rose in a dose-dependent manner during the study period.",
    "Adherence to the study protocol exceeded {adh}% in both arms.",
    "Dietary intake was assessed with a validated food frequency questionnaire.",
    "Further trials with standardized outcome definitions are required.",
    "Symptom diaries were collected daily and reviewed by two independent assessors.",
]

TITLE_STEMS = [
    "Vitamin C supplementation and the common cold in {pop}",
    "Effect of {dose} daily ascorbic acid on upper respiratory infections in {pop}",
    "Ascorbic acid for prevention and treatment of colds: {design_short}",
    "Vitamin C and cold duration among {pop}",
    "High-dose vitamin C at symptom onset in {pop}",
]
DESIGN_SHORT = ["a randomized trial", "a cohort study", "a crossover study", "a pilot trial", "a meta-analysis"]

MESH_POOL = [
    ("Ascorbic Acid", True), ("Common Cold", True), ("Dietary Supplements", False),
    ("Respiratory Tract Infections", False), ("Randomized Controlled Trials as Topic", False),
    ("Humans", False), ("Adult", False),
]
KEYWORDS = ["ascorbate", "rhinovirus", "prophylaxis", "immune function", "micronutrients"]

CARDIAC_FINDINGS = [
    "Frailty was an independent predictor of major adverse events after surgery (OR {rr}; 95% CI {lo}-{hi}).",
    "Preoperative anemia was associated with increased 30-day mortality in patients over 75 years.",
    "Chronic kidney disease predicted prolonged intensive care unit stay.",
    "Low serum albumin identified patients at risk of postoperative delirium.",
    "Age alone did not predict poor outcomes once frailty was accounted for.",
    "Emergency status and reduced ejection fraction were the strongest predictors of death.",
]
CARDIAC_TITLES = [
    "Frailty and outcomes of cardiac surgery in the elderly",
    "Predictors of mortality after coronary artery bypass grafting in octogenarians",
    "Preoperative risk factors for delirium after valve surgery in older patients",
    "Functional decline after cardiac surgery in patients aged 80 and over",
    "Nutritional status as a predictor of surgical outcomes in elderly cardiac patients",
    "Renal dysfunction and length of stay after heart surgery in the elderly",
    "Gait speed as a predictor of poor outcomes after cardiac surgery",
    "Risk models for older adults undergoing aortic valve replacement",
]


def fill(template, rng):
    lo = round(rng.uniform(0.5, 0.9), 2)
    return template.format(
        pct=rng.choice([8, 10, 14, 18, 21]),
        rr=round(rng.uniform(0.6, 1.1), 2),
        lo=lo,
        hi=round(lo + rng.uniform(0.1, 0.5), 2),
        days=rng.choice([0.5, 1, 1.5, 2]),
        weeks=rng.choice([8, 12, 16, 24]),
        adh=rng.choice([80, 85, 90, 95]),
    )


def vitamin_abstract(rng, leaning, structured):
    pop = rng.choice(POPULATIONS)
    dose = rng.choice(DOSES)
    design = rng.choice(DESIGNS)
    n = rng.choice([48, 120, 240, 400, 812, 1500])
    background = (
        f"Whether vitamin C prevents or alleviates the common cold remains debated. "
        f"We examined {dose} daily vitamin C in {pop}."
    )
    methods = (
        f"In {design}, {n} participants were followed through one winter season. "
        f"Outcomes were compared with earlier reports (Smith et al. 2013) and with placebo vs. usual care."
    )
    findings = {
        "support": SUPPORT, "refute": REFUTE, "neutral": NEUTRAL,
    }[leaning]
    results = " ".join(fill(t, rng) for t in rng.sample(findings, 2))
    results += " " + fill(rng.choice(NEUTRAL), rng)
    conclusion = {
        "support": "These findings suggest a modest benefit of vitamin C for colds.",
        "refute": "Routine vitamin C supplementation cannot be recommended for cold prevention.",
        "neutral": "The study was not powered to detect differences in cold outcomes.",
    }[leaning]
    parts = [("BACKGROUND", background), ("METHODS", methods), ("RESULTS", results),
             ("CONCLUSIONS", conclusion)]
    if structured:
        return parts
    return [(None, " ".join(text for _, text in parts))]


def cardiac_abstract(rng):
    n = rng.choice([212, 530, 1024, 2310])
    return [(None,
             f"Older patients make up a growing share of cardiac surgery cases. "
             f"We reviewed {n} consecutive patients aged 70 years or older. "
             + " ".join(fill(t, rng) for t in rng.sample(CARDIAC_FINDINGS, 3))
             + " Identifying these predictors may improve preoperative counselling.")]


def article_xml(rec):
    pmid = rec["pmid"]
    lines = ['<PubmedArticle>', '  <MedlineCitation Status="MEDLINE" Owner="NLM">',
             f'    <PMID Version="1">{pmid}</PMID>', '    <Article PubModel="Print">',
             '      <Journal>', '        <JournalIssue CitedMedium="Print">']
    if rec.get("medline_date"):
        lines.append(f'          <PubDate><MedlineDate>{rec["medline_date"]}</MedlineDate></PubDate>')
    elif rec.get("year"):
        lines.append(f'          <PubDate><Year>{rec["year"]}</Year><Month>Jan</Month></PubDate>')
    else:
        lines.append('          <PubDate><Season>Winter</Season></PubDate>')
    lines += ['        </JournalIssue>', f'        <Title>{escape(rec["journal"])}</Title>',
              '      </Journal>', f'      <ArticleTitle>{rec["title_xml"]}</ArticleTitle>']
    if rec["abstract"]:
        lines.append('      <Abstract>')
        for label, text in rec["abstract"]:
            attr = f' Label="{label}" NlmCategory="{label}"' if label else ''
            lines.append(f'        <AbstractText{attr}>{text}</AbstractText>')
        lines.append('      </Abstract>')
    lines += ['      <Language>eng</Language>', '      <PublicationTypeList>']
    for pt in rec["pub_types"]:
        lines.append(f'        <PublicationType UI="D016428">{pt}</PublicationType>')
    lines += ['      </PublicationTypeList>', '    </Article>']
    if rec["mesh"]:
        lines.append('    <MeshHeadingList>')
        for name, major in rec["mesh"]:
            flag = "Y" if major else "N"
            lines.append(f'      <MeshHeading><DescriptorName UI="D000000" MajorTopicYN="{flag}">'
                         f'{escape(name)}</DescriptorName></MeshHeading>')
        lines.append('    </MeshHeadingList>')
    if rec["keywords"]:
        lines.append('    <KeywordList Owner="NOTNLM">')
        for k in rec["keywords"]:
            lines.append(f'      <Keyword MajorTopicYN="N">{escape(k)}</Keyword>')
        lines.append('    </KeywordList>')
    lines += ['  </MedlineCitation>', '  <PubmedData>', '    <ArticleIdList>',
              f'      <ArticleId IdType="pubmed">{pmid}</ArticleId>', '    </ArticleIdList>',
              '  </PubmedData>', '</PubmedArticle>']
    return "\n".join(lines) + "\n"


def esc_text(text):
    # Abstract sentences may carry inline markup; everything else is escaped.
    return escape(text)


def build_records():
    rng = random.Random(20240611)
    records = []
    leanings = ["support"] * 24 + ["refute"] * 18 + ["neutral"] * 10
    rng.shuffle(leanings)
    used_titles = set()
    for i, leaning in enumerate(leanings):
        pmid = str(99100001 + i)
        title = None
        while title is None or title in used_titles:
            stem = rng.choice(TITLE_STEMS)
            title = stem.format(pop=rng.choice(POPULATIONS), dose=rng.choice(DOSES),
                                design_short=rng.choice(DESIGN_SHORT))
        used_titles.add(title)
        abstract = [(l, esc_text(t)) for l, t in vitamin_abstract(rng, leaning, structured=(i % 4 == 0))]
        if i % 7 == 3:
            label, text = abstract[-1]
            abstract[-1] = (label, text + " Effects on <i>Rhinovirus</i> shedding were not measured.")
        rec = {
            "pmid": pmid,
            "title": title,
            "title_xml": escape(title),
            "abstract": abstract,
            "journal": JOURNALS[i % len(JOURNALS)],
            "year": 1972 + (i * 7) % 52,
            "pub_types": ["Journal Article"] + (["Randomized Controlled Trial"] if i % 2 == 0 else []),
            "mesh": rng.sample(MESH_POOL, 4),
            "keywords": rng.sample(KEYWORDS, 2) if i % 3 == 0 else [],
            "group": "vitamin",
            "leaning": leaning,
        }
        records.append(rec)

    # Edge cases within the vitamin C pool.
    records[5]["abstract"] = []  # no abstract
    records[17]["abstract"] = []
    records[40]["abstract"] = []
    records[9]["medline_date"] = "1998 Jan-Feb"
    records[23]["year"] = None  # no usable publication date
    records[11]["title_xml"] = escape("Vitamin C and the common cold: a review of ") + "<i>in vivo</i>" + \
        escape(" evidence")
    records[11]["title"] = "Vitamin C and the common cold: a review of in vivo evidence"
    records[11]["pub_types"] = ["Journal Article", "Review"]

    for j in range(16):
        pmid = str(99200001 + j)
        title = CARDIAC_TITLES[j % len(CARDIAC_TITLES)]
        if j >= len(CARDIAC_TITLES):
            title += f" (cohort {j - len(CARDIAC_TITLES) + 1})"
        records.append({
            "pmid": pmid,
            "title": title,
            "title_xml": escape(title),
            "abstract": [(l, esc_text(t)) for l, t in cardiac_abstract(rng)],
            "journal": CARDIAC_JOURNALS[j % len(CARDIAC_JOURNALS)],
            "year": 2005 + j,
            "pub_types": ["Journal Article"],
            "mesh": [("Cardiac Surgical Procedures", True), ("Aged", False), ("Frailty", True),
                     ("Risk Factors", False)],
            "keywords": ["geriatric surgery"],
            "group": "cardiac",
            "leaning": "neutral",
        })
    return records, rng


def write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def esearch_body(ids, query):
    return {
        "header": {"type": "esearch", "version": "0.3"},
        "esearchresult": {
            "count": str(len(ids)), "retmax": str(len(ids)), "retstart": "0",
            "idlist": ids, "querytranslation": query,
        },
    }


def main(out_dir):
    root = Path(out_dir)
    records, rng = build_records()
    for rec in records:
        write(root / "pubmed" / "efetch" / f"{rec['pmid']}.xml", article_xml(rec))

    vitamin = [r for r in records if r["group"] == "vitamin"]
    cardiac = [r for r in records if r["group"] == "cardiac"]
    # Relevance order as the search service would return it: a fixed shuffle.
    order = [r["pmid"] for r in vitamin]
    rng.shuffle(order)
    write(root / "pubmed" / "esearch" / "vitamin_c.json",
          json.dumps(esearch_body(order[:50], VITAMIN_QUERY), indent=2) + "\n")
    write(root / "pubmed" / "esearch" / "cardiac.json",
          json.dumps(esearch_body([r["pmid"] for r in cardiac], CARDIAC_QUERY), indent=2) + "\n")
    write(root / "pubmed" / "esearch" / "no_hits.json",
          json.dumps(esearch_body([], ""), indent=2) + "\n")
    write(root / "pubmed" / "esearch" / "index.json",
          json.dumps({VITAMIN_QUERY: "vitamin_c.json", CARDIAC_QUERY: "cardiac.json"}, indent=2) + "\n")

    for i, rec in enumerate(records):
        pmid = rec["pmid"]
        # Citation counts for most studies; a few are unknown to the index.
        if i % 11 != 6:
            count = int(rng.paretovariate(1.2) * 12) if rec["year"] else 3
            write(root / "enrichment" / "icite" / f"{pmid}.json",
                  json.dumps({"pmid": int(pmid), "citation_count": count, "year": rec["year"]}) + "\n")
        # Venues for most; some only carry a journal name.
        if i % 9 == 4:
            continue
        paper = {"paperId": f"synthetic{pmid}", "venue": rec["journal"],
                 "journal": {"name": rec["journal"]}}
        if i % 5 == 2:
            paper["venue"] = ""
        write(root / "enrichment" / "s2" / f"{pmid}.json", json.dumps(paper) + "\n")

    # PMC links: some open access with a PDF, some closed.
    for k, rec in enumerate(vitamin[::6]):
        pmid = rec["pmid"]
        pmcid = f"PMC99{pmid[-5:]}"
        link = {
            "header": {"type": "elink", "version": "0.3"},
            "linksets": [{"dbfrom": "pubmed", "ids": [pmid], "linksetdbs": [
                {"dbto": "pmc", "linkname": "pubmed_pmc", "links": [pmcid[3:]]}]}],
        }
        write(root / "pubmed" / "elink" / f"{pmid}.json", json.dumps(link) + "\n")
        if k % 2 == 0:
            oa = (f'<OA><responseDate>2024-06-11 10:00:00</responseDate>'
                  f'<request id="{pmcid}"/><records returned-count="1" total-count="1">'
                  f'<record id="{pmcid}" citation="synthetic" license="CC BY">'
                  f'<link format="tgz" href="ftp://ftp.ncbi.nlm.nih.gov/pub/pmc/oa_package/{pmcid}.tar.gz"/>'
                  f'<link format="pdf" href="ftp://ftp.ncbi.nlm.nih.gov/pub/pmc/oa_pdf/{pmcid}.pdf"/>'
                  f'</record></records></OA>\n')
            write(root / "pubmed" / "oa" / f"{pmcid}.xml", oa)

    manifest = {
        "note": "synthetic records generated by tools/fixtures/generate_pubmed_fixtures.py",
        "records": len(records),
        "leanings": {r["pmid"]: r["leaning"] for r in records},
    }
    write(root / "manifest.json", json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "fixtures")
