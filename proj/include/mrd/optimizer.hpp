#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mrd/grad.hpp"
#include "mrd/large_steps.hpp"
#include "mrd/loss.hpp"
#include "mrd/params.hpp"

namespace mrd {

struct AdamState {
    double lr = 1e-2;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long long step = 0;
    std::vector<std::vector<double>> m, v;

    static AdamState init(const ParameterSet& params, double lr);
};

// Bias-corrected Adam update in place; increments the step counter.
void adam_step(AdamState& state, const GradientSet& grads, ParameterSet& params);

struct RunConfig {
    int epochs = 200;
    std::vector<int> views;  // camera indices; empty = all
    double lr = 3e-2;
    int spp = 16;
    int gt_spp = 1024;
    int max_depth = 4;
    uint64_t seed = 1;
    int patience = 50;

    LossSpec loss;
    std::string extractor;  // FeatureDistance loss

    std::vector<OptimizeTarget> targets;

    // shape runs
    double lambda = 15.0;
    std::vector<int> remesh_epochs;
    double lr_decay = 8e-3;  // applied after each remesh

    std::vector<std::string> sim_extractors;
    int snapshot_every = 0;  // epochs between image snapshots (0 = off)

    void validate() const;
};

// Ground-truth data per view (index-aligned with the run's view list).
struct RunTargets {
    std::vector<LossTarget> views;
    // per sim-extractor, per view: target latents (empty entry when the
    // extractor is perceptual)
    std::vector<std::vector<LatentVector>> sim_latents;
};

struct RunRecord {
    int epoch = 0, view = 0;
    double loss = 0.0, lr = 0.0;
    std::vector<double> sims;
};

struct RunLog {
    std::vector<std::string> sim_names;
    std::vector<RunRecord> rows;
    std::vector<double> epoch_loss;                // mean over views
    std::vector<std::vector<double>> epoch_sims;   // [extractor][epoch]
    int best_epoch = -1;
    double best_loss = 0.0;
    ParameterSet best_params;
    int stopped_epoch = -1;  // last executed epoch
    bool early_stopped = false;
};

// Observer notifications for persistence (snapshots, mesh dumps).
struct RunObserver {
    std::function<void(int epoch, const SceneDescription&, const ParameterSet&, const RunLog&)>
        on_epoch_end;
    std::function<void(int epoch, const SceneDescription&)> on_remesh;
};

struct OptimizeResult {
    ParameterSet params;
    RunLog log;
    SceneDescription scene;  // final optimized scene state
};

// The optimization loop: per epoch, per view - transform (remesh or clip),
// render, loss, backward, optimizer step. Stops early when the epoch-mean
// loss has not improved for `patience` epochs. Shape runs optimize the
// Laplacian-preconditioned latent coordinates.
OptimizeResult optimize(const SceneDescription& init_scene, const ParameterSet& init_params,
                        const RunTargets& targets, const RunConfig& config,
                        const std::vector<Extractor>& sim_extractors,
                        const Extractor* loss_extractor = nullptr,
                        const RunObserver* observer = nullptr);

// Renders ground-truth data for every view of a target scene.
RunTargets make_targets(const SceneDescription& target_scene, const RunConfig& config,
                        const std::vector<Extractor>& sim_extractors);

// Synthetic early-stop oracle used by tests: returns the epoch index at which
// the loop would stop for a given loss sequence, or -1 if it never stops.
int early_stop_epoch(const std::vector<double>& epoch_losses, int patience);

}  // namespace mrd
