#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rlms/trainer.hpp"

namespace rlms {

// Flat key=value text; '#' starts a comment. Keys are the TrainConfig field
// names. Unknown keys and unparsable values throw ConfigError naming the key.
void apply_config_line(TrainConfig& config, const std::string& line, const std::string& where);
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

// Every key with its resolved value; parse_config(render_config(c)) == c.
std::string render_config(const TrainConfig& config);

std::vector<std::string> config_keys();

}  // namespace rlms
