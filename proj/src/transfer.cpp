#include "goldspot/transfer.hpp"

#include "goldspot/error.hpp"

namespace goldspot {

TlSetting TlSetting::parse(std::string_view text) {
    // Accept "011" as well as "[011]".
    if (text.size() >= 2 && text.front() == '[' && text.back() == ']') text = text.substr(1, text.size() - 2);
    if (text.empty()) throw InvalidArgument("TL setting is empty");
    TlSetting s;
    for (char c : text) {
        if (c != '0' && c != '1') throw InvalidArgument("TL setting must be a string of 0/1, got '" + std::string(text) + "'");
        s.code.push_back(c == '1');
    }
    return s;
}

std::string TlSetting::to_string() const {
    std::string s;
    for (bool b : code) s.push_back(b ? '1' : '0');
    return s;
}

std::vector<TlSetting> all_settings(std::size_t n_hidden) {
    if (n_hidden == 0) throw InvalidArgument("all_settings needs at least one hidden layer");
    std::vector<TlSetting> out;
    // Reuse the first k layers, re-learn the rest.
    for (std::size_t k = 1; k < n_hidden; ++k) {
        TlSetting s;
        for (std::size_t i = 0; i < n_hidden; ++i) s.code.push_back(i >= k);
        out.push_back(std::move(s));
    }
    // Re-learn the first k layers, reuse the rest.
    for (std::size_t k = n_hidden - 1; k >= 1; --k) {
        TlSetting s;
        for (std::size_t i = 0; i < n_hidden; ++i) s.code.push_back(i < k);
        out.push_back(std::move(s));
    }
    out.push_back(TlSetting{std::vector<bool>(n_hidden, true)});
    return out;
}

SdaModel transfer_init(const SdaModel& source, const TrainConfig& config, const TransferOptions& options) {
    source.validate();
    SdaModel target = source;
    target.metadata.seed = config.seed;
    target.metadata.history = {};
    if (!options.freeze_output) target.output = initial_output_layer(source.output.inputs(), config.seed);
    return target;
}

SdaModel transfer(const SdaModel& source, std::span<const Patch> target_train, const TlSetting& setting,
                  const TrainConfig& config, const TransferOptions& options) {
    if (setting.size() != source.hidden.size())
        throw InvalidArgument("TL setting " + setting.to_string() + " has " + std::to_string(setting.size()) +
                              " entries, source model has " + std::to_string(source.hidden.size()) + " hidden layers");
    for (const auto& p : target_train)
        if (p.side != source.patch_side)
            throw DimensionError("target patch side " + std::to_string(p.side) + " does not match source side " +
                                 std::to_string(source.patch_side));
    SdaModel target = transfer_init(source, config, options);
    return fine_tune(std::move(target), target_train, config, setting.code, !options.freeze_output);
}

}  // namespace goldspot
