#include "spdmark/error.hpp"

namespace spdmark {

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace spdmark
