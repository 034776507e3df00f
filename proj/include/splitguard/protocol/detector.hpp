#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "splitguard/data/dataset.hpp"
#include "splitguard/nn/network.hpp"

namespace splitguard::protocol {

enum class Verdict { undecided, no_attack, attack };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::undecided: return "undecided";
    case Verdict::no_attack: return "no-attack";
    case Verdict::attack: return "attack";
  }
  return "?";
}

inline Verdict parse_verdict(std::string_view s) {
  if (s == "undecided") return Verdict::undecided;
  if (s == "no-attack") return Verdict::no_attack;
  if (s == "attack") return Verdict::attack;
  throw ConfigError("unknown verdict '" + std::string(s) + "'");
}

// Client-side detector hooked into a split-learning session. The session asks
// before each batch whether to send altered labels, then reports the client
// parameter gradient the server's reply produced.
class Detector {
 public:
  virtual ~Detector() = default;

  virtual std::string_view name() const = 0;

  // Replacement labels when batch `batch_index` should go out as a fake batch.
  virtual std::optional<data::Labels> plan_batch(std::size_t /*batch_index*/,
                                                 std::span<const int> /*labels*/,
                                                 int /*num_classes*/) {
    return std::nullopt;
  }

  // Current verdict after folding in this batch's client gradient.
  virtual Verdict observe(std::size_t batch_index, bool is_fake, const nn::GradVec& grad) = 0;
};

}  // namespace splitguard::protocol
