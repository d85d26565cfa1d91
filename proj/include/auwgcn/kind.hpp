#pragma once

#include <stdexcept>
#include <string>

namespace auwgcn {

enum class Kind { macro, micro };

inline const char* to_string(Kind k) { return k == Kind::macro ? "macro" : "micro"; }

inline Kind kind_from_string(const std::string& s) {
    if (s == "macro") return Kind::macro;
    if (s == "micro") return Kind::micro;
    throw std::invalid_argument("unknown expression kind: " + s);
}

}  // namespace auwgcn
