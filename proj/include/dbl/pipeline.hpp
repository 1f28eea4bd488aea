#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dbl/glimpse.hpp"
#include "dbl/predict.hpp"
#include "dbl/remix.hpp"

namespace dbl {

struct RunItem {
    std::string item_id;
    ItemClass item_class = ItemClass::CoM;
    std::filesystem::path fg;
    std::filesystem::path bg;
    // Original stems for projection; the prepared stems are used when absent.
    std::optional<std::filesystem::path> ref_fg;
    std::optional<std::filesystem::path> ref_bg;
    bool trial = false;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::vector<std::string> slots{"S01"};
    std::size_t taps = kDefaultFilterTaps;
    double gate_threshold_rel = kDefaultGateThresholdLu;
    std::optional<double> peak_limit = 1.0;
    bool project = true;
    OimConfig oim;
    std::vector<RunItem> items;
    // item_id,pld_lu medians, or a ratings CSV from which non-expert medians are taken.
    std::optional<std::filesystem::path> ground_truth;
    std::optional<std::filesystem::path> ratings;
    LdMode fit_ld_mode = LdMode::measured;
    bool class_specific = false;
    std::filesystem::path output_dir;
};

// Paths inside the config resolve against the config file's directory;
// output_dir defaults to $DBL_DATA_DIR/runs/<config stem>.
RunConfig load_run_config(const std::filesystem::path& path);

std::filesystem::path data_root();

// Ground-truth CSV: item_id,pld_lu
std::map<std::string, double> read_ground_truth_csv(const std::filesystem::path& path);

struct RunOutcome {
    std::filesystem::path run_dir;
    bool predicted = false;
    std::vector<std::string> notices;
};

// Normalizes stems, renders condition sets and manifests, measures gated and
// projected LDs and OIM scores, and predicts/fits when ground truth is given.
// Outputs are staged in a sibling directory and moved into place only on
// success.
RunOutcome run_pipeline(const RunConfig& config, std::ostream& log);

}  // namespace dbl
