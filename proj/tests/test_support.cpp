#include "test_support.hpp"

#include "medqa/error.hpp"

namespace medqa::testing {

std::string DownChat::complete(const ChatRequest&) {
    fail(ErrorCode::ProviderUnavailable, "chat provider offline");
}

}  // namespace medqa::testing
