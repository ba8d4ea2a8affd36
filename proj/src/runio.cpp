#include "mrd/runio.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mrd/errors.hpp"

namespace mrd {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

RunPaths make_run_dir(const std::string& out_dir) {
    RunPaths p;
    p.root = out_dir;
    p.log_csv = (fs::path(out_dir) / "log.csv").string();
    p.manifest = (fs::path(out_dir) / "manifest.json").string();
    p.images_dir = (fs::path(out_dir) / "images").string();
    p.meshes_dir = (fs::path(out_dir) / "meshes").string();
    p.plots_dir = (fs::path(out_dir) / "plots").string();
    p.latents_dir = (fs::path(out_dir) / "latents").string();
    fs::create_directories(p.images_dir);
    fs::create_directories(p.meshes_dir);
    fs::create_directories(p.plots_dir);
    fs::create_directories(p.latents_dir);
    return p;
}

void write_runlog_csv(const RunLog& log, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "epoch,view,loss,lr";
    for (const auto& name : log.sim_names) f << ",sim_" << name;
    f << "\n";
    for (const auto& r : log.rows) {
        f << r.epoch << "," << r.view << "," << fmt_double(r.loss) << "," << fmt_double(r.lr);
        for (double s : r.sims) f << "," << fmt_double(s);
        f << "\n";
    }
}

LoadedRunLog read_runlog_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open run log: " + path);
    LoadedRunLog log;
    std::string line;
    if (!std::getline(f, line)) throw ParseError("empty run log: " + path);
    {
        std::stringstream ss(line);
        std::string col;
        int idx = 0;
        while (std::getline(ss, col, ',')) {
            if (idx >= 4) {
                if (col.rfind("sim_", 0) != 0)
                    throw ParseError("run log: unexpected column '" + col + "'");
                log.sim_names.push_back(col.substr(4));
            }
            ++idx;
        }
    }
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string col;
        RunRecord r;
        int idx = 0;
        while (std::getline(ss, col, ',')) {
            switch (idx) {
                case 0: r.epoch = std::stoi(col); break;
                case 1: r.view = std::stoi(col); break;
                case 2: r.loss = std::stod(col); break;
                case 3: r.lr = std::stod(col); break;
                default: r.sims.push_back(std::stod(col));
            }
            ++idx;
        }
        if (r.sims.size() != log.sim_names.size())
            throw ParseError("run log: ragged row in " + path);
        log.rows.push_back(std::move(r));
    }
    return log;
}

std::vector<double> LoadedRunLog::epoch_mean_loss() const {
    std::map<int, std::pair<double, int>> acc;
    for (const auto& r : rows) {
        acc[r.epoch].first += r.loss;
        acc[r.epoch].second += 1;
    }
    std::vector<double> out;
    for (const auto& [e, p] : acc) out.push_back(p.first / p.second);
    return out;
}

std::vector<double> LoadedRunLog::epoch_mean_sim(const std::string& name) const {
    int col = -1;
    for (size_t i = 0; i < sim_names.size(); ++i)
        if (sim_names[i] == name) col = static_cast<int>(i);
    if (col < 0) throw InvalidArgument("run log has no similarity column for '" + name + "'");
    std::map<int, std::pair<double, int>> acc;
    for (const auto& r : rows) {
        acc[r.epoch].first += r.sims[col];
        acc[r.epoch].second += 1;
    }
    std::vector<double> out;
    for (const auto& [e, p] : acc) out.push_back(p.first / p.second);
    return out;
}

std::vector<double> LoadedRunLog::view_sims_at(const std::string& name, int epoch) const {
    int col = -1;
    for (size_t i = 0; i < sim_names.size(); ++i)
        if (sim_names[i] == name) col = static_cast<int>(i);
    if (col < 0) throw InvalidArgument("run log has no similarity column for '" + name + "'");
    std::vector<double> out;
    for (const auto& r : rows)
        if (r.epoch == epoch) out.push_back(r.sims[col]);
    return out;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const ManifestInfo& info, const std::string& path) {
    json j;
    j["command"] = info.command;
    j["config"] = info.config_path;
    j["seed"] = info.seed;
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(info.scene_hash));
    j["scene_hash"] = hex;
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(info.weights_hash));
    j["weights_hash"] = hex;
    j["version"] = info.version;
    j["started"] = info.started;
    j["finished"] = info.finished;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

ManifestInfo read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open manifest: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    ManifestInfo info;
    info.command = j.value("command", "");
    info.config_path = j.value("config", "");
    info.seed = j.value("seed", static_cast<uint64_t>(0));
    info.scene_hash = std::stoull(j.value("scene_hash", "0"), nullptr, 16);
    info.weights_hash = std::stoull(j.value("weights_hash", "0"), nullptr, 16);
    info.version = j.value("version", "");
    info.started = j.value("started", "");
    info.finished = j.value("finished", "");
    return info;
}

void write_latents_csv(const std::vector<LatentVector>& latents, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& z : latents) {
        for (int i = 0; i < z.dim(); ++i) f << (i ? "," : "") << fmt_double(z.v[i]);
        f << "\n";
    }
}

std::vector<LatentVector> read_latents_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open latents: " + path);
    std::vector<LatentVector> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        LatentVector z;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) z.v.push_back(std::stod(col));
        out.push_back(std::move(z));
    }
    return out;
}

void write_samples_csv(const std::vector<double>& values, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "value\n";
    for (double v : values) f << fmt_double(v) << "\n";
}

// ---------------------------------------------------------------------------
// Static SVG line plots

void write_svg_plot(const std::string& path, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<PlotSeries>& series) {
    const int width = 720, height = 440;
    const int ml = 64, mr = 20, mt = 40, mb = 48;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
    }
    if (ymin > ymax) {
        ymin = 0;
        ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto Y = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    f << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";
    // axes
    f << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
    f << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
    char buf[64];
    for (int k = 0; k <= 4; ++k) {
        const double xv = xmin + (xmax - xmin) * k / 4.0;
        const double yv = ymin + (ymax - ymin) * k / 4.0;
        std::snprintf(buf, sizeof(buf), "%.4g", xv);
        f << "<text x=\"" << X(xv) << "\" y=\"" << mt + ph + 18
          << "\" text-anchor=\"middle\" font-size=\"11\">" << buf << "</text>\n";
        std::snprintf(buf, sizeof(buf), "%.4g", yv);
        f << "<text x=\"" << ml - 8 << "\" y=\"" << Y(yv) + 4
          << "\" text-anchor=\"end\" font-size=\"11\">" << buf << "</text>\n";
    }
    f << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
    f << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\">" << ylabel << "</text>\n";

    int legend_y = mt + 8;
    for (const auto& s : series) {
        if (s.x.empty()) continue;
        f << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        if (s.step) {
            for (size_t i = 0; i < s.x.size(); ++i) {
                if (i > 0) f << X(s.x[i]) << "," << Y(s.y[i - 1]) << " ";
                f << X(s.x[i]) << "," << Y(s.y[i]) << " ";
            }
        } else {
            for (size_t i = 0; i < s.x.size(); ++i) f << X(s.x[i]) << "," << Y(s.y[i]) << " ";
        }
        f << "\"/>\n";
        f << "<text x=\"" << ml + pw - 6 << "\" y=\"" << legend_y
          << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << s.color << "\">" << s.name
          << "</text>\n";
        legend_y += 16;
    }
    f << "</svg>\n";
}

}  // namespace mrd
