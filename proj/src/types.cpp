#include "simt/types.hpp"

#include "simt/errors.hpp"

namespace simt {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kNone: return "none";
    case Variant::kCopy: return "copy";
    case Variant::kSwap2: return "swap2";
    case Variant::kRotate1: return "rotate1";
  }
  throw ContractError("unknown variant value");
}

Variant parse_variant(const std::string& name) {
  if (name == "none") return Variant::kNone;
  if (name == "copy") return Variant::kCopy;
  if (name == "swap2") return Variant::kSwap2;
  if (name == "rotate1") return Variant::kRotate1;
  throw ParseError("unknown variant '" + name + "'");
}

}  // namespace simt
