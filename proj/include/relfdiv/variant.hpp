#pragma once

// The five critic-comparison schemes. Sy scores real and fake samples
// against the fixed reference 0; the four relativistic schemes score them
// against each other (pairwise, against the opposite batch mean, or against
// the pooled mean).

#include <stdexcept>
#include <string>
#include <string_view>

namespace relfdiv {

enum class Variant {
  Sy,    // f(C(x)) + f(-C(y))
  Rp,    // 2 f(C(x) - C(y)) over pairs
  Ra,    // f(C(x) - mean C(y)) + f(mean C(x) - C(y))
  Ralf,  // 2 f(C(x) - mean C(y))
  Rc,    // f(C(x) - pooled mean) + f(pooled mean - C(y))
};

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Sy: return "sy";
    case Variant::Rp: return "rp";
    case Variant::Ra: return "ra";
    case Variant::Ralf: return "ralf";
    case Variant::Rc: return "rc";
  }
  throw std::invalid_argument("unknown variant");
}

inline Variant parse_variant(std::string_view name) {
  if (name == "sy") return Variant::Sy;
  if (name == "rp") return Variant::Rp;
  if (name == "ra") return Variant::Ra;
  if (name == "ralf") return Variant::Ralf;
  if (name == "rc") return Variant::Rc;
  throw std::invalid_argument("unknown variant name '" + std::string(name) +
                              "' (expected sy|rp|ra|ralf|rc)");
}

}  // namespace relfdiv
