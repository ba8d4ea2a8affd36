#include "mrd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mrd/analysis.hpp"
#include "mrd/errors.hpp"

namespace mrd {

AdamState AdamState::init(const ParameterSet& params, double lr_) {
    AdamState s;
    s.lr = lr_;
    s.m.reserve(params.entries.size());
    s.v.reserve(params.entries.size());
    for (const auto& e : params.entries) {
        s.m.emplace_back(e.values.size(), 0.0);
        s.v.emplace_back(e.values.size(), 0.0);
    }
    return s;
}

namespace {

void adam_update_arrays(AdamState& state, const std::vector<std::vector<double>>& grads,
                        std::vector<std::vector<double>*> values) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < grads.size(); ++i) {
        auto& m = state.m[i];
        auto& v = state.v[i];
        auto& val = *values[i];
        for (size_t j = 0; j < grads[i].size(); ++j) {
            const double g = grads[i][j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double mh = m[j] / bc1;
            const double vh = v[j] / bc2;
            val[j] -= state.lr * mh / (std::sqrt(vh) + state.eps);
        }
    }
}

}  // namespace

void adam_step(AdamState& state, const GradientSet& grads, ParameterSet& params) {
    if (!grads.shape_congruent(params))
        throw InvalidArgument("adam_step: gradient shape mismatch");
    if (state.m.size() != params.entries.size())
        throw InvalidArgument("adam_step: state shape mismatch");
    for (size_t i = 0; i < state.m.size(); ++i)
        if (state.m[i].size() != params.entries[i].values.size())
            throw InvalidArgument("adam_step: state shape mismatch");
    std::vector<std::vector<double>*> values;
    values.reserve(params.entries.size());
    for (auto& e : params.entries) values.push_back(&e.values);
    adam_update_arrays(state, grads.values, values);
}

void RunConfig::validate() const {
    if (epochs < 0) throw InvalidArgument("RunConfig: epochs must be >= 0");
    if (patience < 1) throw InvalidArgument("RunConfig: patience must be >= 1");
    if (spp < 1 || gt_spp < 1) throw InvalidArgument("RunConfig: spp must be >= 1");
    int prev = -1;
    for (int e : remesh_epochs) {
        if (e <= prev) throw InvalidArgument("RunConfig: remesh epochs must be strictly increasing");
        if (e >= epochs && epochs > 0)
            throw InvalidArgument("RunConfig: remesh epoch beyond total epochs");
        prev = e;
    }
    if (loss.kind == LossKind::FeatureDistance && extractor.empty())
        throw InvalidArgument("RunConfig: feature loss requires an extractor id");
}

int early_stop_epoch(const std::vector<double>& epoch_losses, int patience) {
    double best = std::numeric_limits<double>::infinity();
    int since = 0;
    for (size_t e = 0; e < epoch_losses.size(); ++e) {
        if (epoch_losses[e] < best) {
            best = epoch_losses[e];
            since = 0;
        } else {
            ++since;
        }
        if (since >= patience) return static_cast<int>(e);
    }
    return -1;
}

RunTargets make_targets(const SceneDescription& target_scene, const RunConfig& config,
                        const std::vector<Extractor>& sim_extractors) {
    RunTargets t;
    std::vector<int> views = config.views;
    if (views.empty())
        for (size_t i = 0; i < target_scene.cameras.size(); ++i)
            views.push_back(static_cast<int>(i));
    RenderSettings st;
    st.spp = config.gt_spp;
    st.max_depth = config.max_depth;
    st.seed = hash_combine(config.seed, 0x74617267ull);
    t.sim_latents.resize(sim_extractors.size());
    for (const int v : views) {
        if (v < 0 || v >= static_cast<int>(target_scene.cameras.size()))
            throw InvalidArgument("make_targets: view index out of range");
        LossTarget lt;
        lt.hdr = render(target_scene, target_scene.cameras[v], st);
        lt.display = tonemap(lt.hdr);
        for (size_t x = 0; x < sim_extractors.size(); ++x)
            t.sim_latents[x].push_back(sim_extractors[x].produces_latent()
                                           ? extract(sim_extractors[x], lt.display)
                                           : LatentVector{});
        t.views.push_back(std::move(lt));
    }
    return t;
}

OptimizeResult optimize(const SceneDescription& init_scene, const ParameterSet& init_params,
                        const RunTargets& targets, const RunConfig& config,
                        const std::vector<Extractor>& sim_extractors,
                        const Extractor* loss_extractor, const RunObserver* observer) {
    config.validate();
    init_params.validate();

    OptimizeResult out;
    out.scene = init_scene;
    out.params = init_params;
    RunLog& log = out.log;
    for (const auto& ex : sim_extractors) log.sim_names.push_back(ex.id);
    log.epoch_sims.resize(sim_extractors.size());

    std::vector<int> views = config.views;
    if (views.empty())
        for (size_t i = 0; i < init_scene.cameras.size(); ++i) views.push_back(static_cast<int>(i));
    if (views.size() != targets.views.size())
        throw InvalidArgument("optimize: target count does not match view count");
    if (config.epochs == 0) return out;

    // shape run: exactly one vertex entry drives the latent parameterization
    int vertex_entry = -1;
    for (size_t i = 0; i < out.params.entries.size(); ++i)
        if (out.params.entries[i].kind == EntryKind::VertexPositions) {
            if (vertex_entry >= 0)
                throw InvalidArgument("optimize: at most one vertex entry is supported");
            vertex_entry = static_cast<int>(i);
        }
    const bool shape_run = vertex_entry >= 0;
    if (shape_run && out.params.entries.size() > 1)
        throw InvalidArgument("optimize: vertex and material entries cannot be mixed");

    double lr = config.lr;
    LaplacianSystem lap;
    std::vector<double> u;  // differential coordinates of the optimized mesh
    AdamState adam = AdamState::init(out.params, lr);
    if (shape_run) {
        const int oi = out.scene.object_index(out.params.entries[vertex_entry].object);
        lap = LaplacianSystem::build(out.scene.objects[oi].mesh, config.lambda);
        u = lap.to_differential(out.params.entries[vertex_entry].values);
    }

    const std::set<int> remesh_set(config.remesh_epochs.begin(), config.remesh_epochs.end());
    double best = std::numeric_limits<double>::infinity();
    int epochs_since_improve = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::vector<double> sim_sums(sim_extractors.size(), 0.0);

        for (size_t vi = 0; vi < views.size(); ++vi) {
            // transformation step: remesh on scheduled epochs (first view),
            // clip bounded parameters otherwise
            if (shape_run) {
                if (vi == 0 && remesh_set.count(epoch)) {
                    ParamEntry& e = out.params.entries[vertex_entry];
                    const int oi = out.scene.object_index(e.object);
                    Mesh& mesh = out.scene.objects[oi].mesh;
                    e.values = lap.from_differential(u);
                    // write current positions before refining
                    for (size_t v = 0; v < mesh.positions.size(); ++v)
                        mesh.positions[v] = {e.values[3 * v], e.values[3 * v + 1],
                                             e.values[3 * v + 2]};
                    mesh = midpoint_tessellate(mesh);
                    e.values.resize(3 * mesh.positions.size());
                    for (size_t v = 0; v < mesh.positions.size(); ++v) {
                        e.values[3 * v] = mesh.positions[v].x;
                        e.values[3 * v + 1] = mesh.positions[v].y;
                        e.values[3 * v + 2] = mesh.positions[v].z;
                    }
                    lap = LaplacianSystem::build(mesh, config.lambda);
                    u = lap.to_differential(e.values);
                    lr *= config.lr_decay;  // decay follows every remesh
                    adam = AdamState::init(out.params, lr);
                    if (observer && observer->on_remesh) observer->on_remesh(epoch, out.scene);
                }
                out.params.entries[vertex_entry].values = lap.from_differential(u);
            } else {
                clip_params(out.params);
            }

            RenderSettings st;
            st.spp = config.spp;
            st.max_depth = config.max_depth;
            st.seed = hash_combine(hash_combine(config.seed, epoch), vi);

            const int view = views[vi];
            GradRenderResult res =
                render_with_grad(out.scene, out.params, out.scene.cameras[view], st, config.loss,
                                 targets.views[vi], loss_extractor);

            RunRecord row;
            row.epoch = epoch;
            row.view = view;
            row.loss = res.loss;
            row.lr = lr;
            const DisplayImage disp = tonemap(res.image);
            for (size_t x = 0; x < sim_extractors.size(); ++x) {
                double sim;
                if (sim_extractors[x].produces_latent()) {
                    sim = hypersphere_similarity(extract(sim_extractors[x], disp),
                                                 targets.sim_latents[x][vi]);
                } else {
                    sim = 1.0 - perceptual_distance(sim_extractors[x], disp,
                                                    targets.views[vi].display);
                }
                row.sims.push_back(sim);
                sim_sums[x] += sim;
            }
            log.rows.push_back(row);
            loss_sum += res.loss;

            // optimizer step (once per view)
            if (shape_run) {
                // pull the vertex gradient back to differential coordinates
                std::vector<std::vector<double>> garr(1);
                garr[0] = lap.from_differential(res.grads.values[vertex_entry]);
                std::vector<std::vector<double>*> vals = {&u};
                adam_update_arrays(adam, garr, vals);
            } else {
                adam_step(adam, res.grads, out.params);
            }
        }

        const double mean_loss = loss_sum / static_cast<double>(views.size());
        log.epoch_loss.push_back(mean_loss);
        for (size_t x = 0; x < sim_extractors.size(); ++x)
            log.epoch_sims[x].push_back(sim_sums[x] / static_cast<double>(views.size()));
        log.stopped_epoch = epoch;

        if (mean_loss < best) {
            best = mean_loss;
            epochs_since_improve = 0;
            log.best_epoch = epoch;
            log.best_loss = mean_loss;
            if (shape_run)
                out.params.entries[vertex_entry].values = lap.from_differential(u);
            log.best_params = out.params;
        } else {
            ++epochs_since_improve;
        }
        if (observer && observer->on_epoch_end)
            observer->on_epoch_end(epoch, out.scene, out.params, log);
        if (epochs_since_improve >= config.patience) {
            log.early_stopped = true;
            break;
        }
    }

    // final state: sync vertices / clip material parameters once more
    if (shape_run) {
        out.params.entries[vertex_entry].values = lap.from_differential(u);
        out.params.apply(out.scene);
    } else {
        clip_params(out.params);
        out.params.apply(out.scene);
    }
    return out;
}

}  // namespace mrd
