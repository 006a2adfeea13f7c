// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/config.hpp"

#include "progsplat/error.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

namespace progsplat {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
    fail(ErrorCode::Config, "config key '" + std::string(key) + "': cannot parse value '" + std::string(value) + "'");
}

template <class T>
T parse(std::string_view key, std::string_view value) {
    value = trim(value);
    T out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value);
    return out;
}

template <>
bool parse<bool>(std::string_view key, std::string_view value) {
    value = trim(value);
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    bad_value(key, value);
}

template <class T>
std::string show(const T& v) {
    std::ostringstream os;
    if constexpr (std::is_same_v<T, bool>) {
        os << (v ? "true" : "false");
    } else {
        os << std::setprecision(17) << v;
    }
    return os.str();
}

struct Key {
    std::string name;
    std::function<void(PhaseConfig&, std::string_view)> set;
    std::function<std::string(const PhaseConfig&)> get;
};

template <class T, class Access>
Key make_key(std::string name, Access access) {
    Key k;
    k.name = name;
    k.set = [name, access](PhaseConfig& c, std::string_view v) { access(c) = parse<T>(name, v); };
    k.get = [access](const PhaseConfig& c) { return show<T>(access(const_cast<PhaseConfig&>(c))); };
    return k;
}

#define PS_KEY(type, key, expr) make_key<type>(key, [](PhaseConfig& c) -> type& { return expr; })

const std::vector<Key>& keys() {
    static const std::vector<Key> table = [] {
        std::vector<Key> t = {
            PS_KEY(int, "initial_images", c.initial_images),
            PS_KEY(int, "initial_iters", c.initial_iters),
            PS_KEY(int, "iters_per_event", c.iters_per_event),
            PS_KEY(int, "key_images", c.key_images),
            PS_KEY(double, "target_iters", c.target_iters),
            PS_KEY(double, "lr_initial", c.lr_initial),
            PS_KEY(double, "lr_final", c.lr_final),
            PS_KEY(int, "final_iters", c.final_iters),
            PS_KEY(double, "lambda_l1", c.loss.l1),
            PS_KEY(double, "lambda_ssim", c.loss.ssim),
            PS_KEY(double, "lambda_load", c.loss.load),
            PS_KEY(double, "lr_rotation", c.rates.rotation),
            PS_KEY(double, "lr_scale", c.rates.scale),
            PS_KEY(double, "lr_opacity", c.rates.opacity),
            PS_KEY(double, "lr_sh_dc", c.rates.sh_dc),
            PS_KEY(double, "lr_sh_rest", c.rates.sh_rest),
            PS_KEY(double, "position_lr_scale", c.position_lr_scale),
            PS_KEY(int, "densify_interval", c.densify_interval),
            PS_KEY(double, "densify_grad_threshold", c.densify_grad_threshold),
            PS_KEY(double, "percent_dense", c.percent_dense),
            PS_KEY(double, "prune_opacity", c.prune_opacity),
            PS_KEY(double, "densify_final_fraction", c.densify_final_fraction),
            PS_KEY(double, "novelty_threshold", c.novelty_threshold),
            PS_KEY(int, "threshold_refresh_events", c.threshold_refresh_events),
            PS_KEY(double, "init_opacity", c.init_opacity),
            PS_KEY(int, "max_weight_layer", c.max_weight_layer),
            PS_KEY(bool, "interleave", c.interleave),
            PS_KEY(int, "sh_degree", c.sh_degree),
            PS_KEY(int, "sh_upgrade_interval", c.sh_upgrade_interval),
            PS_KEY(double, "near", c.near),
            PS_KEY(double, "background_r", c.background[0]),
            PS_KEY(double, "background_g", c.background[1]),
            PS_KEY(double, "background_b", c.background[2]),
            PS_KEY(int, "workers", c.workers),
            PS_KEY(std::uint64_t, "seed", c.seed),
            PS_KEY(bool, "no_field_update", c.ablations.no_field_update),
            PS_KEY(bool, "no_image_weighting", c.ablations.no_image_weighting),
            PS_KEY(bool, "no_semiglobal", c.ablations.no_semiglobal),
            PS_KEY(bool, "no_load", c.ablations.no_load),
            PS_KEY(bool, "no_splat_parallel", c.ablations.no_splat_parallel),
        };
        return t;
    }();
    return table;
}

#undef PS_KEY

} // namespace

void set_config_value(PhaseConfig& config, std::string_view key, std::string_view value) {
    key = trim(key);
    if (key == "ablate") {
        apply_ablations(config, value);
        return;
    }
    for (const auto& k : keys()) {
        if (k.name == key) {
            k.set(config, value);
            return;
        }
    }
    fail(ErrorCode::Config, "unknown config key '" + std::string(key) + "'");
}

PhaseConfig read_config(const std::filesystem::path& path, PhaseConfig base) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            fail(ErrorCode::Config, path.filename().string() + ":" + std::to_string(number) + ": expected key=value");
        }
        set_config_value(base, view.substr(0, eq), view.substr(eq + 1));
    }
    return base;
}

void apply_ablations(PhaseConfig& config, std::string_view list) {
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const auto end = comma == std::string_view::npos ? list.size() : comma;
        const std::string_view name = trim(list.substr(start, end - start));
        start = end + 1;
        if (name.empty() || name == "none") continue;
        if (name == "no_field_update") {
            config.ablations.no_field_update = true;
        } else if (name == "no_image_weighting") {
            config.ablations.no_image_weighting = true;
        } else if (name == "no_semiglobal") {
            config.ablations.no_semiglobal = true;
        } else if (name == "no_load") {
            config.ablations.no_load = true;
        } else if (name == "no_splat_parallel") {
            config.ablations.no_splat_parallel = true;
        } else {
            fail(ErrorCode::Config, "unknown ablation '" + std::string(name) + "'");
        }
    }
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : keys()) out.push_back(k.name);
    return out;
}

std::string format_config(const PhaseConfig& config) {
    std::string out;
    for (const auto& k : keys()) out += k.name + "=" + k.get(config) + "\n";
    return out;
}

} // namespace progsplat
