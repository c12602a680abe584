#include "rlms/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "rlms/error.hpp"

namespace rlms {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) throw ConfigError("bad value '" + value + "' for key '" + key + "'");
    return out;
}

std::string render_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Field {
    const char* key;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field number_field(const char* key, T TrainConfig::*member) {
    return {key,
            [key, member](TrainConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
            [member](const TrainConfig& c) {
                if constexpr (std::is_floating_point_v<T>) {
                    return render_double(c.*member);
                } else {
                    return std::to_string(c.*member);
                }
            }};
}

Field string_field(const char* key, std::string TrainConfig::*member) {
    return {key, [member](TrainConfig& c, const std::string& v) { c.*member = v; },
            [member](const TrainConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f{
        number_field("learning_rate", &TrainConfig::learning_rate),
        number_field("env_batch", &TrainConfig::env_batch),
        number_field("replay_batch", &TrainConfig::replay_batch),
        number_field("total_env_steps", &TrainConfig::total_env_steps),
        number_field("horizon", &TrainConfig::horizon),
        number_field("gamma", &TrainConfig::gamma),
        number_field("omega", &TrainConfig::omega),
        number_field("seed", &TrainConfig::seed),
        number_field("image_size", &TrainConfig::image_size),
        string_field("content_dir", &TrainConfig::content_dir),
        string_field("style_dir", &TrainConfig::style_dir),
        number_field("checkpoint_interval", &TrainConfig::checkpoint_interval),
        number_field("pool_capacity", &TrainConfig::pool_capacity),
        number_field("warmup", &TrainConfig::warmup),
        number_field("initial_alpha", &TrainConfig::initial_alpha),
        number_field("entropy_scale", &TrainConfig::entropy_scale),
        number_field("backbone_seed", &TrainConfig::backbone_seed),
        string_field("backbone_path", &TrainConfig::backbone_path),
    };
    return f;
}

}  // namespace

void apply_config_line(TrainConfig& config, const std::string& raw, const std::string& where) {
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    for (const auto& f : fields()) {
        if (key == f.key) {
            f.set(config, value);
            return;
        }
    }
    throw ConfigError(where + ": unknown config key '" + key + "'");
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) apply_config_line(base, line, "line " + std::to_string(++n));
    return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str(), std::move(base));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string render_config(const TrainConfig& config) {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

}  // namespace rlms
