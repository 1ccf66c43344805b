#include "dawa/losses.hpp"

namespace dawa {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::CE: return "ce";
    case LossKind::CW: return "cw";
    case LossKind::MIFPE: return "mifpe";
    case LossKind::DAWA: return "dawa";
    case LossKind::DAWA_TARGETED: return "dawa-targeted";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "ce" || name == "pgd") return LossKind::CE;
  if (name == "cw") return LossKind::CW;
  if (name == "mifpe") return LossKind::MIFPE;
  if (name == "dawa") return LossKind::DAWA;
  if (name == "dawa-targeted") return LossKind::DAWA_TARGETED;
  throw ArgumentError("unknown loss '" + std::string(name) + "'");
}

}  // namespace dawa
