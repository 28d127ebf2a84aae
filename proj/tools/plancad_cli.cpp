// plancad: batch pipeline runs and the review service.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"

#include "parallel.hpp"
#include "plancad/chunker.hpp"
#include "plancad/errors.hpp"
#include "plancad/jsonio.hpp"
#include "plancad/metrics.hpp"
#include "plancad/synthgen.hpp"
#include "plancad/workspace.hpp"
#include "service.hpp"

namespace fs = std::filesystem;
using namespace plancad;
using jsonio::Json;
using workspace::read_file;
using workspace::write_file;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRejected = 3;

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error("UsageError", message) {}
};

screening::ReferenceTable load_table(const std::string& path) {
    if (path.empty()) return screening::default_reference_table();
    return screening::load_reference_table(read_file(path));
}

// One drawing to chunk: an id and its projected annotation.
struct Source {
    std::string id;
    annotator::AnnotatedDrawing state;
};

// --in may name a drawing file, a workspace drawing directory, or a
// workspace root.
std::vector<Source> collect_sources(const fs::path& in, const std::string& table_path) {
    std::vector<Source> out;
    if (fs::is_regular_file(in)) {
        const auto table = load_table(table_path);
        auto base = workspace::build_base(read_file(in), table);
        out.push_back({in.stem().string(), std::move(base.annotation)});
        return out;
    }
    if (!fs::is_directory(in)) throw UsageError("no such file or directory: " + in.string());
    if (fs::exists(in / workspace::kSourceFile)) {
        workspace::Workspace ws(in.parent_path());
        const std::string id = in.filename().string();
        out.push_back({id, ws.project_state(id)});
        return out;
    }
    workspace::Workspace ws(in);
    for (const auto& id : ws.drawing_ids()) out.push_back({id, ws.project_state(id)});
    return out;
}

std::map<std::string, fs::path> chunk_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
    std::map<std::string, fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".svg") files[e.path().filename().string()] = e.path();
    }
    return files;
}

metrics::EvalUnit eval_unit(const std::string& name, const chunker::Chunk& pred, const chunker::Chunk& gt) {
    metrics::EvalUnit u;
    u.name = name;
    for (const auto& cp : gt.primitives) {
        u.gt[cp.source_id()] = cp.label;
        u.lengths[cp.source_id()] = geometry::primitive_length(cp.primitive);
    }
    for (const auto& cp : pred.primitives) {
        u.pred[cp.source_id()] = cp.label;
        if (cp.score) u.scores[cp.source_id()] = *cp.score;
    }
    return u;
}

int cmd_screen(const std::string& table_path, const std::string& in, double max_dev, const std::string& mode) {
    const auto table = load_table(table_path);
    const auto flat = ingest::flatten_blocks(ingest::parse_document(read_file(in)));
    const auto report = screening::screen_drawing(
        table, flat, max_dev, mode == "primitives" ? screening::DeviationMode::Primitives : screening::DeviationMode::Layers);
    Json j = jsonio::screening_json(report);
    j["drawing"] = fs::path(in).stem().string();
    std::cout << j.dump() << "\n";
    return report.accepted ? kExitOk : kExitRejected;
}

int cmd_annotate(const std::string& table_path, const fs::path& in, const fs::path& out) {
    const std::string id = in.stem().string();
    if (!workspace::valid_drawing_id(id)) throw UsageError("drawing file name is not a valid id: " + id);
    fs::create_directories(out);
    if (!table_path.empty()) {
        const std::string text = read_file(table_path);
        screening::load_reference_table(text);  // validate before installing
        write_file(out / workspace::kTableFile, text);
    }
    workspace::Workspace ws(out);
    ws.add_drawing(id, read_file(in));
    const auto base = ws.base(id);
    const auto state = ws.project_state(id);
    Json doc = jsonio::drawing_json(id, *base, state, ws.read_log(id).size());
    doc["flagList"] = jsonio::flags_json(state.flags);
    doc["labels"] = jsonio::labels_json(state);
    write_file(out / id / workspace::kAnnotationFile, doc.dump(2) + "\n");
    Json summary;
    summary["drawing"] = id;
    summary["primitives"] = state.size();
    summary["instances"] = state.instance_count();
    summary["flags"] = state.flags.size();
    summary["accepted"] = base->screening.accepted;
    summary["deviation"] = base->screening.deviation;
    std::cout << summary.dump() << "\n";
    return kExitOk;
}

int cmd_chunk(const fs::path& in, const std::string& table_path, double size, const fs::path& out, unsigned jobs) {
    if (!(size > 0.0)) throw UsageError("--size must be positive");
    const auto sources = collect_sources(in, table_path);
    fs::create_directories(out);
    std::vector<std::size_t> counts(sources.size());
    tools::parallel_for(sources.size(), jobs, [&](std::size_t i) {
        const auto chunks = chunker::chunk_drawing(sources[i].state, sources[i].id, size);
        for (const auto& c : chunks) write_file(out / (c.id.str() + ".svg"), chunker::export_chunk(c));
        counts[i] = chunks.size();
    });
    Json summary = Json::array();
    for (std::size_t i = 0; i < sources.size(); ++i) {
        Json j;
        j["drawing"] = sources[i].id;
        j["chunks"] = counts[i];
        summary.push_back(std::move(j));
    }
    std::cout << summary.dump() << "\n";
    return kExitOk;
}

int cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir, const std::string& report_path,
             const std::string& weight, double default_score, unsigned jobs) {
    const auto preds = chunk_files(pred_dir);
    const auto gts = chunk_files(gt_dir);
    for (const auto& [name, _] : preds) {
        if (!gts.contains(name)) throw CoverageError("prediction " + name + " has no ground-truth chunk");
    }
    std::vector<std::string> names;
    for (const auto& [name, _] : gts) {
        if (!preds.contains(name)) throw CoverageError("ground-truth chunk " + name + " has no prediction");
        names.push_back(name);
    }
    std::vector<metrics::EvalUnit> units(names.size());
    std::vector<screening::ClassCatalog> catalogs(names.size());
    tools::parallel_for(names.size(), jobs, [&](std::size_t i) {
        const auto gt = chunker::import_chunk(read_file(gts.at(names[i])));
        const auto pred = chunker::import_chunk(read_file(preds.at(names[i])));
        if (!(pred.catalog == gt.catalog)) throw CoverageError(names[i] + ": class catalogs differ");
        units[i] = eval_unit(names[i], pred, gt);
        catalogs[i] = gt.catalog;
    });
    for (const auto& c : catalogs) {
        if (!(c == catalogs.front())) throw CoverageError("chunks disagree on the class catalog");
    }
    const auto catalog = catalogs.empty() ? screening::default_reference_table().catalog : catalogs.front();
    const auto report = metrics::evaluate(units, catalog,
                                          weight == "count" ? metrics::Weighting::Count : metrics::Weighting::Length,
                                          default_score);
    const std::string text = metrics::report_to_json(report, catalog);
    if (report_path.empty() || report_path == "-") {
        std::cout << text;
    } else {
        write_file(report_path, text);
        Json summary;
        summary["units"] = report.units;
        summary["pq"] = report.panoptic.total.classes ? Json(report.panoptic.total.pq) : Json(nullptr);
        summary["f1"] = report.semantic.count.f1;
        summary["wf1"] = report.semantic.weighted.f1;
        summary["map"] = report.ap.classes ? Json(report.ap.map) : Json(nullptr);
        std::cout << summary.dump() << "\n";
    }
    return kExitOk;
}

struct GenArgs {
    std::optional<std::uint64_t> seed;
    int count = 1;
    std::string spec_path;
    fs::path out;
    std::string truth_chunks;
    double size = chunker::kDefaultChunkSizeM;
    double perturb = 0.0;
    std::uint64_t perturb_seed = 0;
};

int cmd_gen(const GenArgs& a, unsigned jobs) {
    if (a.count < 1) throw UsageError("--count must be at least 1");
    if (a.perturb < 0.0 || a.perturb > 1.0) throw UsageError("--perturb must lie in [0, 1]");
    synthgen::GenSpec base;
    if (!a.spec_path.empty()) base = synthgen::spec_from_json(read_file(a.spec_path));
    if (a.seed) base.seed = *a.seed;
    fs::create_directories(a.out);
    if (!a.truth_chunks.empty()) fs::create_directories(a.truth_chunks);
    const auto& catalog = screening::default_reference_table().catalog;
    Json summary = Json::array();
    std::vector<Json> rows(static_cast<std::size_t>(a.count));
    tools::parallel_for(rows.size(), jobs, [&](std::size_t k) {
        synthgen::GenSpec spec = base;
        spec.seed = base.seed + k;
        const std::string id = "synth-" + std::to_string(spec.seed);
        const auto gen = synthgen::generate_drawing(spec);
        write_file(a.out / (id + ".dxf"), ingest::serialize_document(gen.document));
        Json truth;
        truth["drawing"] = id;
        truth["spec"] = Json::parse(synthgen::spec_to_json(spec));
        Json labels = Json::object();
        for (const auto& [sid, label] : gen.truth.labels) labels[sid] = {catalog.name(label.cls), label.instance};
        truth["labels"] = std::move(labels);
        write_file(a.out / (id + ".truth.json"), truth.dump(2) + "\n");
        std::size_t chunk_count = 0;
        if (!a.truth_chunks.empty()) {
            auto flat = std::make_shared<const ingest::FlatDrawing>(ingest::flatten_blocks(gen.document));
            auto labels_used = gen.truth;
            if (a.perturb > 0.0) labels_used = synthgen::perturb_labels(gen.truth, a.perturb, a.perturb_seed + k, catalog);
            const auto ann = synthgen::with_labels(flat, catalog, labels_used.labels);
            for (const auto& c : chunker::chunk_drawing(ann, id, a.size)) {
                write_file(fs::path(a.truth_chunks) / (c.id.str() + ".svg"), chunker::export_chunk(c));
                ++chunk_count;
            }
        }
        Json row;
        row["drawing"] = id;
        row["primitives"] = gen.truth.labels.size();
        row["instances"] = gen.truth.instances.size();
        row["chunks"] = chunk_count;
        rows[k] = std::move(row);
    });
    for (auto& r : rows) summary.push_back(std::move(r));
    std::cout << summary.dump() << "\n";
    return kExitOk;
}

int cmd_render(const std::string& in, int w, int h, double stroke, const std::string& format, const std::string& out) {
    if (w <= 0 || h <= 0) throw UsageError("--width and --height must be positive");
    if (!(stroke > 0.0)) throw UsageError("--stroke must be positive");
    const auto chunk = chunker::import_chunk(read_file(in));
    const auto grid = chunker::render_chunk(chunk, w, h, stroke);
    const std::string data = format == "raw" ? chunker::to_raw_grid(grid) : chunker::to_pgm(grid);
    if (out.empty() || out == "-") {
        std::fwrite(data.data(), 1, data.size(), stdout);
    } else {
        write_file(out, data);
    }
    return kExitOk;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(std::string root, const std::string& host, int port, const std::string& token, double size) {
    if (root.empty()) {
        if (const char* env = std::getenv("PLANCAD_ROOT")) root = env;
    }
    if (root.empty()) throw UsageError("--root not given and PLANCAD_ROOT is unset");
    if (!fs::is_directory(root)) throw UsageError("workspace root is not a directory: " + root);
    workspace::Workspace ws(root);
    httplib::Server server;
    service::install_routes(server, ws, {token, size});
    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("IoError", "cannot bind " + host + ":" + std::to_string(port));
    Json ready;
    ready["listening"] = host + ":" + std::to_string(bound);
    ready["root"] = root;
    std::cout << ready.dump() << std::endl;
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen_after_bind();
    g_server = nullptr;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"plancad: vector floor-plan annotation and evaluation"};
    app.require_subcommand(1);
    unsigned jobs = tools::default_jobs();
    app.add_option("--jobs", jobs, "Worker threads for batch subcommands")->check(CLI::PositiveNumber);

    std::string table, in, out;
    double max_dev = screening::kDefaultMaxDeviation;
    std::string mode = "layers";
    auto* screen = app.add_subcommand("screen", "Check layer standardization against a reference table");
    screen->add_option("--table", table, "Reference table (default: bundled)");
    screen->add_option("--in", in, "Drawing file")->required();
    screen->add_option("--max-deviation", max_dev, "Largest accepted deviation")->check(CLI::Range(0.0, 1.0));
    screen->add_option("--mode", mode, "Deviation over layers or primitives")
        ->check(CLI::IsMember({"layers", "primitives"}));

    auto* annotate = app.add_subcommand("annotate", "Annotate a drawing into a workspace");
    annotate->add_option("--table", table, "Reference table (default: bundled)");
    annotate->add_option("--in", in, "Drawing file")->required();
    annotate->add_option("--out", out, "Workspace directory")->required();

    double size = chunker::kDefaultChunkSizeM;
    auto* chunk = app.add_subcommand("chunk", "Tile annotated drawings into chunk files");
    chunk->add_option("--in", in, "Drawing file, workspace drawing or workspace root")->required();
    chunk->add_option("--table", table, "Reference table for a bare drawing file");
    chunk->add_option("--size", size, "Chunk side in meters");
    chunk->add_option("--out", out, "Output directory")->required();

    std::string pred_dir, gt_dir, report_path, weight = "length";
    double default_score = 1.0;
    auto* eval = app.add_subcommand("eval", "Score predicted chunks against ground-truth chunks");
    eval->add_option("--pred", pred_dir, "Predicted chunk directory")->required();
    eval->add_option("--gt", gt_dir, "Ground-truth chunk directory")->required();
    eval->add_option("--report", report_path, "Report file ('-' for stdout)");
    eval->add_option("--weight", weight, "IoU and wF1 weighting")->check(CLI::IsMember({"length", "count"}));
    eval->add_option("--default-score", default_score, "Score for predictions without data-score")
        ->check(CLI::Range(0.0, 1.0));

    GenArgs gen_args;
    std::uint64_t seed = 0;
    auto* gen = app.add_subcommand("gen", "Generate synthetic drawings with ground truth");
    auto* seed_opt = gen->add_option("--seed", seed, "Seed (overrides the generator spec)");
    gen->add_option("--count", gen_args.count, "Number of consecutive seeds");
    gen->add_option("--spec", gen_args.spec_path, "JSON generator spec");
    gen->add_option("--out", gen_args.out, "Output directory")->required();
    gen->add_option("--truth-chunks", gen_args.truth_chunks, "Also write ground-truth chunk files here");
    gen->add_option("--size", gen_args.size, "Chunk side in meters");
    gen->add_option("--perturb", gen_args.perturb, "Relabel this fraction of primitives in the chunk files");
    gen->add_option("--perturb-seed", gen_args.perturb_seed, "Seed of the relabeling");

    int width = chunker::kDefaultRenderSize, height = chunker::kDefaultRenderSize;
    double stroke = 1.0;
    std::string format = "pgm";
    auto* render = app.add_subcommand("render", "Rasterize a chunk file");
    render->add_option("--in", in, "Chunk file")->required();
    render->add_option("--width", width, "Width in pixels");
    render->add_option("--height", height, "Height in pixels");
    render->add_option("--stroke", stroke, "Stroke width in pixels");
    render->add_option("--format", format, "pgm or raw")->check(CLI::IsMember({"pgm", "raw"}));
    render->add_option("--out", out, "Output file (default stdout)");

    std::string root, host = "127.0.0.1", token;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Serve the /v1 review API over a workspace");
    serve->add_option("--root", root, "Workspace root (default $PLANCAD_ROOT)");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--auth-token", token, "Shared secret required by mutating endpoints");
    serve->add_option("--size", size, "Chunk side in meters");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << jsonio::error_line("UsageError", e.what()) << "\n";
        return kExitUsage;
    }

    try {
        if (*screen) return cmd_screen(table, in, max_dev, mode);
        if (*annotate) return cmd_annotate(table, in, out);
        if (*chunk) return cmd_chunk(in, table, size, out, jobs);
        if (*eval) return cmd_eval(pred_dir, gt_dir, report_path, weight, default_score, jobs);
        if (*gen) {
            if (*seed_opt) gen_args.seed = seed;
            return cmd_gen(gen_args, jobs);
        }
        if (*render) return cmd_render(in, width, height, stroke, format, out);
        if (*serve) return cmd_serve(root, host, port, token, size);
    } catch (const UsageError& e) {
        std::cerr << jsonio::error_line(e.kind(), e.what()) << "\n";
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << jsonio::error_line(std::string("FormatError.") + to_string(e.format_kind()), e.what()) << "\n";
        return kExitFailure;
    } catch (const Error& e) {
        std::cerr << jsonio::error_line(e.kind(), e.what()) << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << jsonio::error_line("InternalError", e.what()) << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
