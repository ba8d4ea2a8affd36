#pragma once

#include <string>
#include <vector>

#include "mrd/optimizer.hpp"

namespace mrd {

struct RunPaths {
    std::string root;
    std::string log_csv;
    std::string manifest;
    std::string images_dir;
    std::string meshes_dir;
    std::string plots_dir;
    std::string latents_dir;
};

// Creates root and the standard subdirectories.
RunPaths make_run_dir(const std::string& out_dir);

void write_runlog_csv(const RunLog& log, const std::string& path);

struct LoadedRunLog {
    std::vector<std::string> sim_names;
    std::vector<RunRecord> rows;

    std::vector<double> epoch_mean_loss() const;
    // per-epoch mean over views for the named extractor
    std::vector<double> epoch_mean_sim(const std::string& name) const;
    // per-view sims at one epoch
    std::vector<double> view_sims_at(const std::string& name, int epoch) const;
};

LoadedRunLog read_runlog_csv(const std::string& path);

struct ManifestInfo {
    std::string command;
    std::string config_path;
    uint64_t seed = 0;
    uint64_t scene_hash = 0;
    uint64_t weights_hash = 0;
    std::string version = "mrd 0.1.0";
    std::string started, finished;  // ISO-8601 UTC
};

void write_manifest(const ManifestInfo& info, const std::string& path);
ManifestInfo read_manifest(const std::string& path);

std::string timestamp_utc();

// Latent matrices (one row per view) for RSA at analysis time.
void write_latents_csv(const std::vector<LatentVector>& latents, const std::string& path);
std::vector<LatentVector> read_latents_csv(const std::string& path);

struct PlotSeries {
    std::string name;
    std::string color;  // CSS color
    std::vector<double> x, y;
    bool step = false;  // staircase (ECDF) rendering
};

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<PlotSeries>& series);

void write_samples_csv(const std::vector<double>& values, const std::string& path);

}  // namespace mrd
