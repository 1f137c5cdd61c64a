#include "mapnav/mapgen/vocab.hpp"

#include "mapnav/error.hpp"

namespace mapnav::mapgen {

using supervision::BevMap;

int Vocab::vocab_bins(int vocab_size) {
  const int rest = vocab_size - kMapBase - world::kNumActions;
  if (rest <= 0 || rest % 6 != 0) {
    throw Error(ErrorCode::InvalidConfig, "vocabulary size " + std::to_string(vocab_size) +
                                              " matches no codebook");
  }
  return rest / 6;
}

Vocab::Vocab(int dist_bins) : dist_bins_(dist_bins) {
  if (dist_bins < 1 || dist_bins > 256) {
    throw Error(ErrorCode::InvalidConfig, "distance bins must lie in [1, 256]");
  }
}

int Vocab::delta_token(const world::PoseDelta& d) {
  if (d.initial) return kDeltaBase;
  if (d.forward == 0 && d.right == 0) {
    if (d.quarter_turns == 0) return kDeltaBase + 1;
    if (d.quarter_turns == -1) return kDeltaBase + 3;
    if (d.quarter_turns == 1) return kDeltaBase + 4;
  }
  if (d.forward == 1 && d.right == 0 && d.quarter_turns == 0) return kDeltaBase + 2;
  throw Error(ErrorCode::InvalidConfig, "pose delta is not a single action");
}

int Vocab::map_token(int code) const {
  if (code < 0 || code >= n_map_codes()) {
    throw Error(ErrorCode::NotAMapCode, "code " + std::to_string(code));
  }
  return kMapBase + code;
}

int Vocab::map_code(int token) const {
  if (!is_map_token(token)) throw Error(ErrorCode::NotAMapCode, "token " + std::to_string(token));
  return token - kMapBase;
}

world::Action Vocab::token_action(int token) const {
  if (!is_action_token(token)) {
    throw Error(ErrorCode::MalformedPlan, "token " + std::to_string(token) + " is not an action");
  }
  return static_cast<world::Action>(token - action_base());
}

std::string Vocab::describe(int t) const {
  static const char* kControl[] = {"<pad>", "<bos_map>", "<bos_pol>", "<sep>"};
  static const char* kDeltas[] = {"<start>", "<still>", "<fwd>", "<left>", "<right>"};
  if (t >= 0 && t < kWordBase) return kControl[t];
  if (t >= kWordBase && t < kObsBase) return std::string(world::word_text(t - kWordBase));
  if (t >= kObsBase && t < kDeltaBase) return "obs:" + std::to_string(t - kObsBase);
  if (t >= kDeltaBase && t < kMapBase) return kDeltas[t - kDeltaBase];
  if (is_map_token(t)) return "map:" + std::to_string(t - kMapBase);
  if (is_action_token(t)) return "act:" + std::string(world::action_name(token_action(t)));
  return "<oov:" + std::to_string(t) + ">";
}

// ---------------------------------------------------------------- codebook

Codebook::Codebook(int dist_bins) : bins_(dist_bins) {
  if (dist_bins < 1 || dist_bins > 256) {
    throw Error(ErrorCode::InvalidConfig, "distance bins must lie in [1, 256]");
  }
}

int Codebook::encode(std::uint8_t occ, std::uint8_t dist, std::uint8_t lm) const {
  int o = 0;
  if (occ == supervision::kOccObstacle) {
    o = 0;
  } else if (occ == supervision::kOccUnknown) {
    o = 1;
  } else if (occ == supervision::kOccFree) {
    o = 2;
  } else {
    throw Error(ErrorCode::IllegalChannelValue, "occupancy value " + std::to_string(occ));
  }
  if (lm != supervision::kLmOff && lm != supervision::kLmOn) {
    throw Error(ErrorCode::IllegalChannelValue, "landmark value " + std::to_string(lm));
  }
  const int bin = static_cast<int>(dist) * bins_ / 256;
  return o * (2 * bins_) + bin * 2 + (lm == supervision::kLmOn ? 1 : 0);
}

void Codebook::decode(int code, std::uint8_t& occ, std::uint8_t& dist, std::uint8_t& lm) const {
  if (code < 0 || code >= size()) throw Error(ErrorCode::NotAMapCode, "code " + std::to_string(code));
  static constexpr std::uint8_t kOcc[] = {supervision::kOccObstacle, supervision::kOccUnknown,
                                          supervision::kOccFree};
  occ = kOcc[code / (2 * bins_)];
  const int bin = (code / 2) % bins_;
  // Upper-middle integer of the bin's value range [lo, hi].
  const int lo = (256 * bin + bins_ - 1) / bins_;
  const int hi = (256 * (bin + 1) + bins_ - 1) / bins_ - 1;
  dist = static_cast<std::uint8_t>((lo + hi + 1) / 2);
  lm = (code % 2) ? supervision::kLmOn : supervision::kLmOff;
}

std::vector<int> tokenize_bev(const BevMap& map, const Codebook& codebook) {
  const std::size_t n = static_cast<std::size_t>(map.size) * map.size;
  if (map.occupancy.size() != n || map.distance.size() != n || map.landmark.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "BEV channel sizes do not match S*S");
  }
  std::vector<int> codes(n);
  for (std::size_t i = 0; i < n; ++i) {
    codes[i] = codebook.encode(map.occupancy[i], map.distance[i], map.landmark[i]);
  }
  return codes;
}

BevMap detokenize_bev(std::span<const int> codes, int size, const Codebook& codebook) {
  if (codes.size() != static_cast<std::size_t>(size) * size) {
    throw Error(ErrorCode::ShapeMismatch, "code count does not match S*S");
  }
  BevMap m(size);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    codebook.decode(codes[i], m.occupancy[i], m.distance[i], m.landmark[i]);
  }
  return m;
}

// ---------------------------------------------------------------- layout

void Layout::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (obs_size < 1 || obs_size % 2 == 0) fail("observation window D must be odd");
  if (history < 0) fail("history length must be non-negative");
  if (map_size < 1) fail("map size S must be positive");
  if (dist_bins < 1 || dist_bins > 256) fail("distance bins must lie in [1, 256]");
  if (n_actions < 1) fail("N must be positive");
  if (range < 0) fail("visibility range must be non-negative");
  if (d_max < 1) fail("d_max must be positive");
}

int Layout::map_prefix_len() const {
  return 1 + world::kMaxInstructionWords + (history + 1) * frame_tokens() + 1;
}

void ObservationHistory::push(world::Observation obs) {
  if (capacity_ <= 0) return;
  frames_.push_back(std::move(obs));
  while (static_cast<int>(frames_.size()) > capacity_) frames_.pop_front();
}

std::vector<int> encode_frame(const world::Observation& obs) {
  std::vector<int> out;
  out.reserve(obs.window.size() + 1);
  out.push_back(Vocab::delta_token(obs.delta));
  for (std::uint8_t c : obs.window) out.push_back(Vocab::obs_token(c));
  return out;
}

namespace {

void append_shared(std::vector<int>& out, const Layout& layout, const world::Instruction& ins,
                   const ObservationHistory& history, const world::Observation& current) {
  if (static_cast<int>(ins.tokens.size()) > world::kMaxInstructionWords) {
    throw Error(ErrorCode::ContextOverflow, "instruction longer than the padded slot");
  }
  for (int w : ins.tokens) out.push_back(Vocab::word_token(w));
  out.insert(out.end(), world::kMaxInstructionWords - ins.tokens.size(), Vocab::kPad);
  const int have = static_cast<int>(history.frames().size());
  if (have > layout.history) throw Error(ErrorCode::ContextOverflow, "history longer than H");
  out.insert(out.end(), static_cast<std::size_t>((layout.history - have) * layout.frame_tokens()),
             Vocab::kPad);
  auto put = [&](const world::Observation& o) {
    if (o.size != layout.obs_size) {
      throw Error(ErrorCode::ShapeMismatch, "observation window size differs from layout D");
    }
    const std::vector<int> f = encode_frame(o);
    out.insert(out.end(), f.begin(), f.end());
  };
  for (const world::Observation& o : history.frames()) put(o);
  put(current);
}

}  // namespace

std::vector<int> map_context(const Layout& layout, const world::Instruction& instruction,
                             const ObservationHistory& history, const world::Observation& current) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(layout.map_prefix_len()));
  out.push_back(Vocab::kBosMap);
  append_shared(out, layout, instruction, history, current);
  out.push_back(Vocab::kSep);
  return out;
}

std::vector<int> policy_context(const Layout& layout, const world::Instruction& instruction,
                                const ObservationHistory& history, const world::Observation& current,
                                std::span<const int> map_tokens) {
  if (static_cast<int>(map_tokens.size()) != layout.map_tokens()) {
    throw Error(ErrorCode::ShapeMismatch, "policy context needs exactly S*S map tokens");
  }
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(layout.policy_prefix_len()));
  out.push_back(Vocab::kBosPol);
  append_shared(out, layout, instruction, history, current);
  out.insert(out.end(), map_tokens.begin(), map_tokens.end());
  out.push_back(Vocab::kSep);
  return out;
}

}  // namespace mapnav::mapgen
