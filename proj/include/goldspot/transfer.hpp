#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "goldspot/sda.hpp"

namespace goldspot {

/// Per-hidden-layer reuse code: 1 = re-learn on the target, 0 = keep the
/// source weights frozen. Written first layer first, e.g. "011".
struct TlSetting {
    std::vector<bool> code;

    static TlSetting parse(std::string_view text);
    std::string to_string() const;
    std::size_t size() const noexcept { return code.size(); }

    bool operator==(const TlSetting&) const = default;
};

/// The evaluated family for n hidden layers: freeze a prefix (0^k 1^(n-k)),
/// then re-learn a prefix (1^k 0^(n-k)), then everything (1^n).
/// For n = 3: 011, 001, 110, 100, 111.
std::vector<TlSetting> all_settings(std::size_t n_hidden);

struct TransferOptions {
    /// Keep the source output layer and never update it (the literal "000"
    /// reading). Off by default: the output layer is re-initialized and trained.
    bool freeze_output = false;
};

/// Copy of the source prepared for the target, before any target epoch.
SdaModel transfer_init(const SdaModel& source, const TrainConfig& config, const TransferOptions& options = {});

/// Copy the source model and fine-tune it on the target patches with the
/// setting as trainable mask. No pre-training happens on the target.
SdaModel transfer(const SdaModel& source, std::span<const Patch> target_train, const TlSetting& setting,
                  const TrainConfig& config, const TransferOptions& options = {});

}  // namespace goldspot
