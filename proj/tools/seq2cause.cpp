// Command-line front end: SCM synthesis, sampling, label planting, the two
// discoverers, fusion, evaluation, and the scaling bench. Exit codes: 0 on
// success, 2 for bad invocations or bad inputs, 1 for anything unexpected.

#include "CLI11.hpp"
#include "json.hpp"
#include "minitoml.hpp"

#include "seq2cause/core.hpp"
#include "seq2cause/density.hpp"
#include "seq2cause/eval.hpp"
#include "seq2cause/fusion.hpp"
#include "seq2cause/oscar.hpp"
#include "seq2cause/rng.hpp"
#include "seq2cause/scm.hpp"
#include "seq2cause/trace.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace s2c;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw config_error("cannot write " + path);
    f << text;
    f.flush();
    if (!f) throw config_error("short write to " + path);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// 8-hex digest of the raw config bytes, used to stamp output artifacts.
std::string config_hash(const std::string& raw) {
    uint64_t h = fnv1a(raw.data(), raw.size());
    uint32_t folded = uint32_t(h ^ (h >> 32));
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", folded);
    return buf;
}

struct Experiment {
    minitoml::Table cfg;
    std::string raw;      // config bytes, echoed next to outputs
    std::string hash;
    uint64_t seed = 0;
    std::string out_dir;
};

Experiment load_experiment(const std::string& path) {
    Experiment e;
    e.raw = slurp(path);
    e.cfg = minitoml::Table::parse(e.raw);
    e.hash = config_hash(e.raw);
    e.seed = uint64_t(e.cfg.get_int("seed", 0));
    e.out_dir = e.cfg.get_string("io.out_dir", ".");
    return e;
}

std::string out_path(const Experiment& e, const std::string& stem, const std::string& ext) {
    return (fs::path(e.out_dir) / (stem + "-" + e.hash + ext)).string();
}

LabelPlan plan_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& err) {
        throw config_error(std::string("bad rules json: ") + err.what());
    }
    LabelPlan plan;
    try {
        plan.n_labels = j.at("n_labels").get<int>();
        for (const auto& r : j.at("rules")) plan.rules.push_back(BooleanRule::parse(r.get<std::string>()));
    } catch (const config_error&) {
        throw;
    } catch (const std::exception& err) {
        throw config_error(std::string("bad rules json: ") + err.what());
    }
    if (int(plan.rules.size()) != plan.n_labels)
        throw config_error("rules json: n_labels does not match the rule list");
    return plan;
}

// A dataset file is self-describing: every line starts with the cls token,
// whose id equals the vocabulary size.
int32_t infer_vocab(const std::string& jsonl) {
    auto eol = jsonl.find('\n');
    std::string first = jsonl.substr(0, eol == std::string::npos ? jsonl.size() : eol);
    try {
        json j = json::parse(first);
        return j.at("tokens").at(0).get<int32_t>();
    } catch (const std::exception& err) {
        throw config_error(std::string("bad dataset line: ") + err.what());
    }
}

std::vector<LabeledSequence> load_dataset(const std::string& path, int32_t vocab) {
    return dataset_from_jsonl(slurp(path), Vocabulary::make(vocab));
}

std::vector<LabeledSequence> load_dataset_infer(const std::string& path) {
    std::string text = slurp(path);
    if (text.empty()) return {};
    return dataset_from_jsonl(text, Vocabulary::make(infer_vocab(text)));
}

ScmSpec scm_from_config(const Experiment& e) {
    return generate_scm(int32_t(e.cfg.get_int("scm.vocab")), int(e.cfg.get_int("scm.memory")),
                        e.cfg.get_double("scm.density"), e.cfg.get_double("scm.weight_scale"),
                        e.cfg.get_double("scm.decay"),
                        uint64_t(e.cfg.get_int("scm.seed", int64_t(e.seed))));
}

std::shared_ptr<const EventDensityEstimator> estimator_from_config(
        const Experiment& e, const std::vector<LabeledSequence>& data) {
    std::string kind = e.cfg.get_string("density.kind", "exact");
    if (kind == "exact") return memoized(std::make_shared<ExactOracle>(scm_from_config(e)));
    if (kind == "perturbed") {
        return memoized(std::make_shared<PerturbedOracle>(
            scm_from_config(e), e.cfg.get_double("density.epsilon"),
            uint64_t(e.cfg.get_int("density.calib_seed", 1)),
            int(e.cfg.get_int("density.histories", 128)),
            int(e.cfg.get_int("density.horizon", 32))));
    }
    if (kind == "learned") {
        TrainConfig tc;
        tc.epochs = int(e.cfg.get_int("density.epochs", tc.epochs));
        tc.lr = e.cfg.get_double("density.lr", tc.lr);
        tc.memory = int(e.cfg.get_int("density.memory", e.cfg.get_int("scm.memory", tc.memory)));
        std::vector<EventSequence> seqs;
        seqs.reserve(data.size());
        for (const auto& ls : data) seqs.push_back(ls.seq);
        auto tr = train_lagged_softmax(seqs, int32_t(e.cfg.get_int("scm.vocab")), tc);
        return memoized(std::make_shared<LearnedModel>(std::move(tr.model)));
    }
    if (kind == "bridge") {
        return std::make_shared<BridgeEstimator>(e.cfg.get_string("density.command"),
                                                 int32_t(e.cfg.get_int("scm.vocab")),
                                                 int(e.cfg.get_int("density.n_labels", 0)));
    }
    throw config_error("unknown density kind \"" + kind + "\"");
}

double parse_tau(const std::string& text) {
    const char* s = text.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end == s || *end != '\0') throw config_error("bad tau \"" + text + "\"");
    return v;
}

// ---- subcommands ----

struct GenScmOpts {
    int32_t vocab = 0;
    int memory = 0;
    double density = 0.0, weight_scale = 0.0, decay = 0.0;
    uint64_t seed = 0;
    std::string out;
};

void cmd_gen_scm(const GenScmOpts& o) {
    ScmSpec spec = generate_scm(o.vocab, o.memory, o.density, o.weight_scale, o.decay, o.seed);
    spit(o.out, scm_to_json(spec));
}

struct SampleOpts {
    std::string spec;
    int len = 0, count = 0;
    uint64_t seed = 0;
    std::string out;
};

void cmd_sample(const SampleOpts& o) {
    ScmSpec spec = scm_from_json(slurp(o.spec));
    std::vector<LabeledSequence> data;
    for (EventSequence& seq : sample_dataset(spec, o.len, o.count, o.seed))
        data.push_back({std::move(seq), {}});
    spit(o.out, dataset_to_jsonl(data));
}

struct PlantOpts {
    std::string data, rules, out;
};

void cmd_plant_labels(const PlantOpts& o) {
    LabelPlan plan = plan_from_json(slurp(o.rules));
    std::string text = slurp(o.data);
    if (text.empty()) {
        spit(o.out, "");
        return;
    }
    Vocabulary vocab = Vocabulary::make(infer_vocab(text));
    std::vector<EventSequence> seqs;
    for (auto& ls : dataset_from_jsonl(text, vocab)) seqs.push_back(std::move(ls.seq));
    spit(o.out, dataset_to_jsonl(plant_labels(seqs, plan, vocab)));
}

struct DiscoverOpts {
    std::string config, data, rules;
    int workers = 1;
    int context = -1;       // trace only, <0 means "from config"
    std::string tau;        // trace only, accepts "inf"
};

void cmd_discover_oscar(const DiscoverOpts& o) {
    Experiment e = load_experiment(o.config);
    LabelPlan plan = plan_from_json(slurp(o.rules));
    auto data = load_dataset(o.data, int32_t(e.cfg.get_int("scm.vocab")));

    int horizon = 0;
    for (const auto& ls : data) {
        if (horizon == 0) horizon = ls.seq.length();
        if (ls.seq.length() != horizon)
            throw config_error("discover-oscar needs one shared sequence length");
    }

    auto events = estimator_from_config(e, data);
    RolloutPosterior posterior(events, plan, horizon,
                               int(e.cfg.get_int("oscar.rollouts", 48)), e.seed);

    OscarConfig cfg;
    cfg.context = int(e.cfg.get_int("oscar.context", cfg.context));
    cfg.sampling.n = int(e.cfg.get_int("oscar.particles", cfg.sampling.n));
    cfg.sampling.top_k = int(e.cfg.get_int("oscar.top_k", cfg.sampling.top_k));
    cfg.sampling.top_p = e.cfg.get_double("oscar.top_p", cfg.sampling.top_p);
    if (e.cfg.has("oscar.temperature"))
        cfg.sampling.temperature = e.cfg.get_double("oscar.temperature");
    cfg.threshold_k = e.cfg.get_double("oscar.threshold_k", cfg.threshold_k);
    cfg.seed = e.seed;

    std::string lines;
    for (const auto& res : batch_discover(data, *events, posterior, cfg, o.workers))
        lines += to_json(res.graph) + "\n";
    spit(out_path(e, "oscar-graphs", ".jsonl"), lines);
    spit(out_path(e, "config", ".toml"), e.raw);
}

void cmd_discover_trace(const DiscoverOpts& o) {
    Experiment e = load_experiment(o.config);
    auto data = load_dataset(o.data, int32_t(e.cfg.get_int("scm.vocab")));
    auto est = estimator_from_config(e, data);

    TraceConfig cfg;
    cfg.n_particles = int(e.cfg.get_int("trace.particles", cfg.n_particles));
    cfg.sparse = e.cfg.get_bool("trace.sparse", false);
    cfg.max_lag = int(e.cfg.get_int("trace.max_lag", 0));
    if (o.context >= 0)
        cfg.context = o.context;
    else if (e.cfg.has("trace.context"))
        cfg.context = int(e.cfg.get_int("trace.context"));
    if (!o.tau.empty())
        cfg.tau = parse_tau(o.tau);
    else if (e.cfg.has("trace.tau"))
        cfg.tau = e.cfg.get_double("trace.tau");

    std::string instance_lines, summary_lines;
    for (const auto& ls : data) {
        TraceConfig per = cfg;
        per.seed = mix_key(stream_key(e.seed),
                           fnv1a_span(std::span<const TokenId>(ls.seq.tokens)));
        TraceResult res = discover_instance(ls.seq, *est, per, o.workers);
        instance_lines += to_json(res.graph) + "\n";
        summary_lines += to_json(project_summary(res.graph, ls.seq)) + "\n";
    }
    spit(out_path(e, "trace-instance", ".jsonl"), instance_lines);
    spit(out_path(e, "trace-summary", ".jsonl"), summary_lines);
    spit(out_path(e, "config", ".toml"), e.raw);
}

struct FuseOpts {
    std::string graphs, data, strategy = "adaptive", out, report;
    double tau = 0.5, tau_max = 0.5, tau_min = 0.05;
    double k = 0.0;
    bool has_k = false;
};

void cmd_fuse(const FuseOpts& o) {
    std::vector<MarkovBoundaryGraph> graphs;
    std::istringstream lines(slurp(o.graphs));
    std::string line;
    while (std::getline(lines, line))
        if (!line.empty()) graphs.push_back(mb_graph_from_json(line));

    std::vector<std::vector<uint8_t>> labels;
    const std::vector<std::vector<uint8_t>>* labels_ptr = nullptr;
    if (!o.data.empty()) {
        for (const auto& ls : load_dataset_infer(o.data)) labels.push_back(ls.labels);
        labels_ptr = &labels;
    }

    FusionConfig cfg;
    if (o.strategy == "union")
        cfg.strategy = FusionStrategy::Union;
    else if (o.strategy == "static")
        cfg.strategy = FusionStrategy::StaticFrequency;
    else if (o.strategy == "adaptive")
        cfg.strategy = FusionStrategy::Adaptive;
    else
        throw config_error("unknown fusion strategy \"" + o.strategy + "\"");
    cfg.tau = o.tau;
    cfg.tau_max = o.tau_max;
    cfg.tau_min = o.tau_min;
    if (o.has_k) cfg.k_override = o.k;

    spit(o.out, to_json(fuse(graphs, cfg, labels_ptr)));
    if (!o.report.empty()) spit(o.report, fusion_report_csv(graphs, cfg, labels_ptr));
}

struct EvalOpts {
    std::string kind = "mb", pred, truth, out;
};

void cmd_eval(const EvalOpts& o) {
    if (o.kind == "mb") {
        MarkovBoundaryGraph pred = mb_graph_from_json(slurp(o.pred));
        LabelPlan plan = plan_from_json(slurp(o.truth));
        TruthBoundaries truth;
        for (int j = 0; j < plan.n_labels; ++j) truth[j] = plan.rules[j].variables();
        spit(o.out, metrics_csv(mb_metrics(pred, truth)));
        return;
    }
    if (o.kind == "instance") {
        InstanceTimeGraph pred = instance_graph_from_json(slurp(o.pred));
        InstanceTimeGraph truth = instance_graph_from_json(slurp(o.truth));
        PrfCounts prf = edge_prf(pred, truth);
        std::string csv = "tp,fp,fn,precision,recall,f1,shd\n";
        csv += std::to_string(prf.tp) + "," + std::to_string(prf.fp) + "," +
               std::to_string(prf.fn) + "," + fmt(prf.precision()) + "," + fmt(prf.recall()) +
               "," + fmt(prf.f1()) + "," + std::to_string(shd(pred, truth)) + "\n";
        spit(o.out, csv);
        return;
    }
    throw config_error("unknown eval kind \"" + o.kind + "\"");
}

struct BenchOpts {
    std::string config;
    int workers = 1;
};

void cmd_bench(const BenchOpts& o) {
    Experiment e = load_experiment(o.config);
    ScmSpec spec = scm_from_config(e);
    int len = int(e.cfg.get_int("bench.len"));
    int runs = int(e.cfg.get_int("bench.runs"));
    if (len < 2) throw config_error("bench.len must be >= 2");
    if (runs < 1) throw config_error("bench.runs must be >= 1");
    auto est = estimator_from_config(e, {});

    TraceConfig cfg;
    cfg.n_particles = int(e.cfg.get_int("trace.particles", cfg.n_particles));
    cfg.sparse = e.cfg.get_bool("trace.sparse", false);
    cfg.max_lag = int(e.cfg.get_int("trace.max_lag", 0));
    if (e.cfg.has("trace.tau")) cfg.tau = e.cfg.get_double("trace.tau");
    // the default context rule can swallow short benchmark sequences whole
    int context = e.cfg.has("trace.context") ? int(e.cfg.get_int("trace.context"))
                                             : std::min(trace_context(len), len - 1);
    cfg.context = context;

    std::string csv =
        "config_hash,run,f1,precision,recall,shd,wall_ms,ci_tests,peak_particle_bytes\n";
    std::vector<std::vector<double>> cols(7);
    for (int r = 0; r < runs; ++r) {
        EventSequence seq = sample_sequence(spec, len, stream_key(e.seed, fnv1a("bench"), r));
        TraceConfig per = cfg;
        per.seed = mix_key(stream_key(e.seed),
                           fnv1a_span(std::span<const TokenId>(seq.tokens)));
        auto t0 = std::chrono::steady_clock::now();
        TraceResult res = discover_instance(seq, *est, per, o.workers);
        double wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
        InstanceTimeGraph truth = instance_ground_truth(spec, seq, context, 10, 0.05, e.seed,
                                                        cfg.sparse ? cfg.max_lag : 0);
        PrfCounts prf = edge_prf(res.graph, truth);
        double row[7] = {prf.f1(),       prf.precision(),      prf.recall(),
                         double(shd(res.graph, truth)),        wall_ms,
                         double(res.ci_tests), double(res.peak_buffer_bytes)};
        csv += e.hash + "," + std::to_string(r);
        for (int c = 0; c < 7; ++c) {
            csv += "," + fmt(row[c]);
            cols[c].push_back(row[c]);
        }
        csv += "\n";
    }
    for (const char* tag : {"mean", "std"}) {
        csv += e.hash + ",";
        csv += tag;
        for (int c = 0; c < 7; ++c) {
            double mean = 0.0;
            for (double v : cols[c]) mean += v;
            mean /= double(runs);
            if (std::string(tag) == "mean") {
                csv += "," + fmt(mean);
            } else {
                double m2 = 0.0;
                for (double v : cols[c]) m2 += (v - mean) * (v - mean);
                csv += "," + fmt(std::sqrt(m2 / double(runs)));
            }
        }
        csv += "\n";
    }
    spit(out_path(e, "bench", ".csv"), csv);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"causal discovery with autoregressive density estimators"};
    app.require_subcommand(1);

    GenScmOpts gen;
    auto* c_gen = app.add_subcommand("gen-scm", "synthesize a lagged-softmax generator");
    c_gen->add_option("--vocab", gen.vocab)->required();
    c_gen->add_option("--memory", gen.memory)->required();
    c_gen->add_option("--density", gen.density)->required();
    c_gen->add_option("--weight-scale", gen.weight_scale)->required();
    c_gen->add_option("--decay", gen.decay)->required();
    c_gen->add_option("--seed", gen.seed)->required();
    c_gen->add_option("--out", gen.out)->required();
    c_gen->callback([&] { cmd_gen_scm(gen); });

    SampleOpts smp;
    auto* c_smp = app.add_subcommand("sample", "draw sequences from a generator spec");
    c_smp->add_option("--spec", smp.spec)->required();
    c_smp->add_option("--len", smp.len)->required();
    c_smp->add_option("--count", smp.count)->required();
    c_smp->add_option("--seed", smp.seed)->required();
    c_smp->add_option("--out", smp.out)->required();
    c_smp->callback([&] { cmd_sample(smp); });

    PlantOpts plant;
    auto* c_plant = app.add_subcommand("plant-labels", "attach boolean-rule labels to a dataset");
    c_plant->add_option("--data", plant.data)->required();
    c_plant->add_option("--rules", plant.rules)->required();
    c_plant->add_option("--out", plant.out)->required();
    c_plant->callback([&] { cmd_plant_labels(plant); });

    DiscoverOpts osc;
    auto* c_osc = app.add_subcommand("discover-oscar", "per-sample Markov-boundary discovery");
    c_osc->add_option("--config", osc.config)->required();
    c_osc->add_option("--data", osc.data)->required();
    c_osc->add_option("--rules", osc.rules)->required();
    c_osc->add_option("--workers", osc.workers);
    c_osc->callback([&] { cmd_discover_oscar(osc); });

    DiscoverOpts trc;
    auto* c_trc = app.add_subcommand("discover-trace", "event-to-event instance discovery");
    c_trc->add_option("--config", trc.config)->required();
    c_trc->add_option("--data", trc.data)->required();
    c_trc->add_option("--context", trc.context);
    c_trc->add_option("--tau", trc.tau);
    c_trc->add_option("--workers", trc.workers);
    c_trc->callback([&] { cmd_discover_trace(trc); });

    FuseOpts fus;
    auto* c_fus = app.add_subcommand("fuse", "fuse per-sample graphs into a population graph");
    c_fus->add_option("--graphs", fus.graphs)->required();
    c_fus->add_option("--data", fus.data);
    c_fus->add_option("--strategy", fus.strategy);
    c_fus->add_option("--tau", fus.tau);
    c_fus->add_option("--tau-max", fus.tau_max);
    c_fus->add_option("--tau-min", fus.tau_min);
    auto* kopt = c_fus->add_option("--k", fus.k);
    c_fus->add_option("--out", fus.out)->required();
    c_fus->add_option("--report", fus.report);
    c_fus->callback([&] {
        fus.has_k = kopt->count() > 0;
        cmd_fuse(fus);
    });

    EvalOpts ev;
    auto* c_ev = app.add_subcommand("eval", "score predictions against ground truth");
    c_ev->add_option("--kind", ev.kind);
    c_ev->add_option("--pred", ev.pred)->required();
    c_ev->add_option("--truth", ev.truth)->required();
    c_ev->add_option("--out", ev.out)->required();
    c_ev->callback([&] { cmd_eval(ev); });

    BenchOpts bn;
    auto* c_bn = app.add_subcommand("bench", "length-scaling benchmark of instance discovery");
    c_bn->add_option("--config", bn.config)->required();
    c_bn->add_option("--workers", bn.workers);
    c_bn->callback([&] { cmd_bench(bn); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 2;
    } catch (const config_error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const BatchError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
