#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "atr/attnreal/attnreal.hpp"

namespace atr {

struct HookSite {
  std::size_t layer = 0;
  std::size_t query_position = 0;
  const TokenTypeMap* map = nullptr;
};

// Post-softmax transform applied to every attention row before the value mix.
// `head_rows[h]` is head h's row over the visible keys of the current query.
// Returns one report per head, or an empty vector when nothing was inspected.
class AttentionHook {
 public:
  virtual ~AttentionHook() = default;
  virtual std::vector<attnreal::SinkReport> transform(std::span<std::vector<double>> head_rows,
                                                      const HookSite& site) const = 0;
};

class IdentityHook final : public AttentionHook {
 public:
  std::vector<attnreal::SinkReport> transform(std::span<std::vector<double>>,
                                              const HookSite&) const override {
    return {};
  }
};

namespace attnreal {

class AttnRealHook final : public AttentionHook {
 public:
  explicit AttnRealHook(AttnRealConfig cfg) : cfg_(std::move(cfg)) {}

  const AttnRealConfig& config() const { return cfg_; }

  std::vector<SinkReport> transform(std::span<std::vector<double>> head_rows,
                                    const HookSite& site) const override;

 private:
  AttnRealConfig cfg_;
};

}  // namespace attnreal
}  // namespace atr
