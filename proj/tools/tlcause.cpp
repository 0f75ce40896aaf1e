// tlcause: simulate factor-model datasets, infer temporal causal relations,
// run the Granger baseline, and score results against ground truth.
//
// Exit codes: 0 success, 1 unexpected failure, 2 usage error, 3 data or
// numerical error, 4 finished but the fdr stage fell back or flagged an
// unreliable null.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tlcause/tlcause.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tlcause;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitWarning = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path ensure_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
    return p;
}

void write_file(const fs::path& path, const std::string& text) {
    auto out = csv::open_out(path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

template <class F>
void write_csv(const fs::path& path, const std::string& header_comment, F&& body) {
    std::ostringstream s;
    if (!header_comment.empty()) s << "# " << header_comment << '\n';
    body(s);
    write_file(path, s.str());
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json warnings_json(const std::vector<std::string>& w) { return json(w); }

json null_json(const NullFit& n) {
    return {{"source", n.source == NullSource::Empirical ? "empirical" : "theoretical"},
            {"delta", n.delta},
            {"sigma", n.sigma},
            {"p0", n.p0},
            {"window", {n.window_lo, n.window_hi}},
            {"fell_back", n.fell_back},
            {"unreliable", n.unreliable}};
}

NullMode parse_null_mode(const std::string& s) {
    if (s == "empirical") return NullMode::Empirical;
    if (s == "theoretical") return NullMode::Theoretical;
    throw UsageError("--null must be 'empirical' or 'theoretical'");
}

void check_lags(const std::vector<std::size_t>& lags) {
    if (lags.empty()) throw UsageError("--lags needs at least one lag");
    for (auto l : lags) {
        if (l < 1) throw UsageError("--lags values must be >= 1");
    }
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string scenario = "A";
    std::uint64_t seed = 0;
    std::size_t portfolios = 25;
    std::size_t days = 3001;
    std::size_t factors = 3;
    std::size_t base_lag = 3;
    std::size_t alt_lag = 1;
    std::size_t random_lag_lo = 0;
    std::size_t random_lag_hi = 3;
    std::size_t dependencies = 3;
    std::vector<double> beta_means;
    std::vector<double> beta_sds;
    bool zero_betas = false;
    double factor_corr = 0.1;
    double residual_sd = 0.5;
    double residual_corr = 0.1;
    std::string factor_csv;
    std::size_t periods = 2;
    bool residuals = false;
    std::string out;
};

SimSpec build_spec(const SimulateArgs& a) {
    SimSpec spec;
    try {
        spec.scenario = parse_scenario(a.scenario);
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
    spec.seed = a.seed;
    spec.n_portfolios = a.portfolios;
    spec.n_days = a.days;
    spec.n_factors = a.factors;
    spec.base_lag = a.base_lag;
    spec.alt_lag = a.alt_lag;
    spec.random_lag_lo = a.random_lag_lo;
    spec.random_lag_hi = a.random_lag_hi;
    spec.n_dependencies = a.dependencies;
    spec.factor_corr = a.factor_corr;
    spec.residual_sd = a.residual_sd;
    spec.residual_corr = a.residual_corr;
    if (a.beta_means.size() != a.beta_sds.size()) throw UsageError("--beta-means and --beta-sds differ in length");
    if (a.zero_betas) {
        spec.betas.assign(spec.n_factors, NormalParams{0.0, 0.0});
    } else if (!a.beta_means.empty()) {
        for (std::size_t j = 0; j < a.beta_means.size(); ++j) spec.betas.push_back({a.beta_means[j], a.beta_sds[j]});
    }
    if (!a.factor_csv.empty()) {
        for (auto& s : load_csv(a.factor_csv)) spec.factor_data.push_back(std::move(s.values));
        if (spec.factor_data.size() != spec.n_factors) {
            throw DataError(a.factor_csv + ": expected " + std::to_string(spec.n_factors) + " factor columns, found " +
                            std::to_string(spec.factor_data.size()));
        }
    }
    spec.validate();
    return spec;
}

json spec_json(const SimSpec& spec, const SimulateArgs& a) {
    json betas = json::array();
    for (const auto& b : spec.resolved_betas()) betas.push_back({{"mean", b.mean}, {"sd", b.sd}});
    json factors = json::array();
    for (const auto& f : spec.resolved_factors()) factors.push_back({{"mean", f.mean}, {"sd", f.sd}});
    return {{"command", "simulate"},
            {"scenario", std::string(1, scenario_letter(spec.scenario))},
            {"seed", spec.seed},
            {"portfolios", spec.n_portfolios},
            {"days", spec.n_days},
            {"factors", spec.n_factors},
            {"base_lag", spec.base_lag},
            {"alt_lag", spec.alt_lag},
            {"random_lag_range", {spec.random_lag_lo, spec.random_lag_hi}},
            {"dependencies", has_dependencies(spec.scenario) ? spec.n_dependencies : 0},
            {"beta_distributions", betas},
            {"factor_distributions", factors},
            {"factor_corr", spec.factor_corr},
            {"residual_sd", spec.residual_sd},
            {"residual_corr", spec.residual_corr},
            {"factor_csv", a.factor_csv.empty() ? json(nullptr) : json(a.factor_csv)},
            {"periods", a.periods},
            {"residuals", a.residuals},
            {"out", a.out}};
}

void write_period(const fs::path& dir, const SimOutput& sim, const SimSpec& spec, bool residuals) {
    const std::string p = std::to_string(sim.period + 1);
    const std::string tag = "seed=" + std::to_string(spec.seed) + " scenario=" +
                            std::string(1, scenario_letter(spec.scenario)) + " period=" + p;
    write_csv(dir / ("returns_p" + p + ".csv"), tag, [&](std::ostream& o) { write_series_csv(o, sim.return_series()); });
    write_csv(dir / ("errors_p" + p + ".csv"), tag, [&](std::ostream& o) { write_series_csv(o, sim.error_series()); });
    write_csv(dir / ("factors_p" + p + ".csv"), tag + " history=" + std::to_string(sim.history),
              [&](std::ostream& o) {
                  o << "t";
                  for (const auto& n : sim.structure.factor_names) o << ',' << n;
                  o << '\n';
                  for (std::size_t r = 0; r < sim.factors.front().size(); ++r) {
                      o << static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(sim.history);
                      for (const auto& f : sim.factors) o << ',' << csv::format(f[r]);
                      o << '\n';
                  }
              });
    if (residuals) {
        write_csv(dir / ("residuals_p" + p + ".csv"), tag,
                  [&](std::ostream& o) { write_series_csv(o, sim.as_series(residualize(sim))); });
    }
}

int run_simulate(const SimulateArgs& a) {
    if (a.periods < 1 || a.periods > 2) throw UsageError("--periods must be 1 or 2");
    const SimSpec spec = build_spec(a);
    const auto dir = ensure_dir(a.out);
    const auto structure = draw_structure(spec);
    const std::string tag = "seed=" + std::to_string(spec.seed) + " scenario=" +
                            std::string(1, scenario_letter(spec.scenario));
    for (std::size_t p = 0; p < a.periods; ++p) write_period(dir, simulate_period(spec, structure, p), spec, a.residuals);
    write_csv(dir / "ground_truth.csv", tag, [&](std::ostream& o) { write_ground_truth_csv(o, structure.ground_truth); });
    write_csv(dir / "ground_truth_alternates.csv", tag,
              [&](std::ostream& o) { write_alternates_csv(o, structure.ground_truth); });
    write_csv(dir / "structure.csv", tag, [&](std::ostream& o) {
        o << "portfolio,shifted";
        for (const auto& f : structure.factor_names) o << ",beta_" << f << ",lag_" << f;
        o << '\n';
        for (std::size_t i = 0; i < structure.names.size(); ++i) {
            o << structure.names[i] << ',' << (structure.shifted[i] ? 1 : 0);
            for (std::size_t j = 0; j < structure.factor_names.size(); ++j) {
                o << ',' << csv::format(structure.betas[i][j]) << ',' << structure.lags[i][j];
            }
            o << '\n';
        }
    });
    auto cfg = spec_json(spec, a);
    cfg["ground_truth_relations"] = structure.ground_truth.relations.size();
    write_json(dir / "config.json", cfg);
    std::cout << "wrote " << a.periods << " period(s), " << structure.ground_truth.relations.size()
              << " ground-truth relations to " << dir.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// infer

struct InferArgs {
    std::string input;
    std::string out;
    std::vector<std::size_t> lags{1, 2, 3};
    double fdr = 0.01;
    std::string null = "empirical";
    std::optional<double> manual_z;
    std::optional<double> manual_epsilon;
    double theta = 0.0;
    std::size_t min_support = 5;
    bool pool_windows = false;
    std::string hypotheses;
    std::size_t bins = 120;
    int degree = 7;
};

int run_infer(const InferArgs& a) {
    check_lags(a.lags);
    InferConfig config;
    config.lags = a.lags;
    config.discretization.threshold = a.theta;
    config.engine.min_support = a.min_support;
    config.engine.pool_windows = a.pool_windows;
    config.mixture.bins = a.bins;
    config.mixture.degree = a.degree;
    config.null.mode = parse_null_mode(a.null);
    config.fdr.threshold = a.fdr;
    config.manual_z = a.manual_z;
    config.manual_epsilon = a.manual_epsilon;

    const auto series = load_csv(a.input);
    const Trace trace = discretize(series, config.discretization);
    std::vector<Hypothesis> hypotheses;
    if (a.hypotheses.empty()) {
        hypotheses = generate_pairwise(trace, exact_windows(config.lags));
    } else {
        std::vector<FormulaLine> lines;
        try {
            lines = parse_formula_lines(csv::read_file(a.hypotheses));
        } catch (const ParseError& e) {
            throw ParseError(e.message(), e.line(), e.column(), e.token(), a.hypotheses);
        }
        for (const auto& line : lines) {
            try {
                hypotheses.push_back(hypothesis_from_formula(line.formula));
            } catch (const DataError& e) {
                throw DataError(a.hypotheses + ":" + std::to_string(line.line) + ": " + e.what());
            }
        }
    }
    const auto result = infer_from_scores(score_hypotheses(trace, std::move(hypotheses), config.engine), config);

    const auto dir = ensure_dir(a.out);
    write_csv(dir / "scores.csv", "", [&](std::ostream& o) { write_scores_csv(o, result.scores); });
    write_csv(dir / "fdr.csv", "", [&](std::ostream& o) { write_fdr_csv(o, result.report); });
    write_csv(dir / "fdr_histogram.csv", "", [&](std::ostream& o) { write_fdr_histogram_csv(o, result.report); });
    write_csv(dir / "relations.csv", "", [&](std::ostream& o) { write_relations_csv(o, result.relations); });

    const auto prima_facie = std::count_if(result.scores.begin(), result.scores.end(),
                                           [](const auto& s) { return s.prima_facie; });
    json cfg = {{"command", "infer"},
                {"input", a.input},
                {"out", a.out},
                {"lags", a.lags},
                {"hypotheses", a.hypotheses.empty() ? json("pairwise") : json(a.hypotheses)},
                {"theta", a.theta},
                {"min_support", a.min_support},
                {"pool_windows", a.pool_windows},
                {"bins", a.bins},
                {"degree", a.degree},
                {"null", a.null},
                {"fdr_threshold", a.fdr},
                {"manual_z", a.manual_z ? json(*a.manual_z) : json(nullptr)},
                {"manual_epsilon", a.manual_epsilon ? json(*a.manual_epsilon) : json(nullptr)},
                {"summary",
                 {{"series", series.size()},
                  {"days", trace.length()},
                  {"hypotheses", result.n_hypotheses},
                  {"prima_facie", prima_facie},
                  {"scored", result.tested.size()},
                  {"significant", result.report.significant_count()},
                  {"relations", result.relations.size()},
                  {"z_center", result.report.center},
                  {"z_scale", result.report.scale},
                  {"density", result.report.mixture.method == DensityMethod::Kernel ? "kernel" : "poisson"},
                  {"null", null_json(result.report.null)},
                  {"warnings", warnings_json(result.warnings)}}}};
    write_json(dir / "config.json", cfg);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << result.n_hypotheses << " hypotheses, " << result.tested.size() << " scored, "
              << result.report.significant_count() << " significant, " << result.relations.size()
              << " relations\n";
    return result.numerical_warning() ? kExitWarning : kExitOk;
}

// ---------------------------------------------------------------------------
// granger

struct GrangerArgs {
    std::string input;
    std::string out;
    std::vector<std::size_t> lags{1, 2, 3};
    double fdr = 0.01;
    std::string null = "theoretical";
    std::optional<double> bh;
};

int run_granger_cmd(const GrangerArgs& a) {
    check_lags(a.lags);
    GrangerConfig config;
    config.lags = a.lags;
    config.null.mode = parse_null_mode(a.null);
    config.fdr.threshold = a.fdr;
    config.bh_q = a.bh;
    const auto series = load_csv(a.input);
    const auto run = run_granger(series, config);

    const auto dir = ensure_dir(a.out);
    write_csv(dir / "granger.csv", "", [&](std::ostream& o) {
        o << "source,target,lag,F,p,z,fdr,label\n";
        for (std::size_t i = 0; i < run.results.size(); ++i) {
            const auto& r = run.results[i];
            const auto& e = run.report.entries[i];
            o << r.source << ',' << r.target << ',' << r.lag << ',' << csv::format(r.f) << ','
              << csv::format(r.p_value) << ',' << csv::format(e.z) << ',' << csv::format(e.fdr) << ','
              << (run.significant[i] ? "significant" : "null") << '\n';
        }
    });
    write_csv(dir / "fdr_histogram.csv", "", [&](std::ostream& o) { write_fdr_histogram_csv(o, run.report); });
    write_csv(dir / "relations.csv", "", [&](std::ostream& o) { write_relations_csv(o, run.relations); });
    const auto flagged = std::count(run.significant.begin(), run.significant.end(), true);
    json cfg = {{"command", "granger"},
                {"input", a.input},
                {"out", a.out},
                {"lags", a.lags},
                {"null", a.null},
                {"fdr_threshold", a.fdr},
                {"bh_q", a.bh ? json(*a.bh) : json(nullptr)},
                {"summary",
                 {{"series", series.size()},
                  {"tests", run.results.size()},
                  {"significant", flagged},
                  {"relations", run.relations.size()},
                  {"null", null_json(run.report.null)},
                  {"warnings", warnings_json(run.warnings)}}}};
    write_json(dir / "config.json", cfg);
    for (const auto& w : run.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << run.results.size() << " tests, " << flagged << " significant, " << run.relations.size()
              << " relations\n";
    return run.numerical_warning() ? kExitWarning : kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::string truth;
    std::vector<std::string> found;
    std::string method = "temporal-logic";
    std::string scenario = "-";
    std::string out;
    bool append = false;
};

int run_evaluate(const EvaluateArgs& a) {
    if (a.found.empty() || a.found.size() > 2) throw UsageError("--found takes one or two relation files");
    const auto truth = read_relations(a.truth);
    std::vector<RelationSet> found;
    for (const auto& f : a.found) found.push_back(read_relations(f));

    std::vector<MetricsRow> rows;
    Metrics pooled;
    for (std::size_t p = 0; p < found.size(); ++p) {
        const auto m = score(found[p], truth);
        pooled += m;
        rows.push_back({a.method, a.scenario, std::to_string(p + 1), m});
    }
    json summary = {{"command", "evaluate"}, {"truth", a.truth}, {"found", a.found},
                    {"method", a.method},    {"scenario", a.scenario}, {"out", a.out}};
    if (found.size() == 2) {
        pooled.intersection = intersection(found[0], found[1]);
        auto both = score(consensus(found[0], found[1]), truth);
        both.intersection = pooled.intersection;
        rows.push_back({a.method, a.scenario, "consensus", both});
        summary["intersection"] = {{"jaccard", *pooled.intersection},
                                   {"common_over_first", overlap_fraction(found[0], found[1])},
                                   {"common_over_second", overlap_fraction(found[1], found[0])}};
    }
    rows.push_back({a.method, a.scenario, "all", pooled});

    std::ostringstream table;
    write_metrics_csv(table, rows);
    std::string text = table.str();
    if (!a.out.empty()) {
        const fs::path out(a.out);
        if (out.has_parent_path()) ensure_dir(out.parent_path().string());
        const bool existing = a.append && fs::exists(out) && fs::file_size(out) > 0;
        std::ofstream f(out, std::ios::binary | (existing ? std::ios::app : std::ios::trunc));
        if (!f) throw DataError("cannot write file: " + a.out);
        f << (existing ? text.substr(text.find('\n') + 1) : text);
        fs::path cfg_path = out;
        cfg_path.replace_extension(".config.json");
        write_json(cfg_path, summary);
    }
    std::cout << text;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal-logic causal inference with empirical-null fdr control"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Generate factor-model return datasets with ground truth");
    s->add_option("--scenario", sim.scenario, "Dataset design A-F")->capture_default_str();
    s->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    s->add_option("--portfolios", sim.portfolios, "Number of portfolios")->capture_default_str();
    s->add_option("--days", sim.days, "Days per period")->capture_default_str();
    s->add_option("--factors", sim.factors, "Number of factors")->capture_default_str();
    s->add_option("--base-lag", sim.base_lag, "Lag of unshifted portfolios")->capture_default_str();
    s->add_option("--alt-lag", sim.alt_lag, "Lag of the shifted half (B, E)")->capture_default_str();
    s->add_option("--random-lag-lo", sim.random_lag_lo, "Smallest random lag (C, F)")->capture_default_str();
    s->add_option("--random-lag-hi", sim.random_lag_hi, "Largest random lag (C, F)")->capture_default_str();
    s->add_option("--dependencies", sim.dependencies, "Error dependencies (D, E, F)")->capture_default_str();
    s->add_option("--beta-means", sim.beta_means, "Per-factor beta means")->delimiter(',');
    s->add_option("--beta-sds", sim.beta_sds, "Per-factor beta standard deviations")->delimiter(',');
    s->add_flag("--zero-betas", sim.zero_betas, "Set every beta to 0");
    s->add_option("--factor-corr", sim.factor_corr, "Correlation between factors")->capture_default_str();
    s->add_option("--residual-sd", sim.residual_sd, "Idiosyncratic error sd")->capture_default_str();
    s->add_option("--residual-corr", sim.residual_corr, "Cross-sectional error correlation")->capture_default_str();
    s->add_option("--factor-csv", sim.factor_csv, "Observed factor series instead of simulated ones");
    s->add_option("--periods", sim.periods, "Independent periods (1 or 2)")->capture_default_str();
    s->add_flag("--residuals", sim.residuals, "Also write factor-regression residuals");
    s->add_option("--out", sim.out, "Output directory")->required();

    InferArgs inf;
    auto* i = app.add_subcommand("infer", "Score pairwise temporal hypotheses and label them by local fdr");
    i->add_option("--input", inf.input, "Returns CSV")->required();
    i->add_option("--out", inf.out, "Output directory")->required();
    i->add_option("--lags", inf.lags, "Exact lags to test")->delimiter(',')->capture_default_str();
    i->add_option("--fdr", inf.fdr, "Local fdr threshold")->capture_default_str();
    i->add_option("--null", inf.null, "empirical or theoretical")->capture_default_str();
    i->add_option("--manual-z", inf.manual_z, "Label by |z| >= cutoff instead of fdr");
    i->add_option("--manual-epsilon", inf.manual_epsilon, "Label by |epsilon_avg| >= cutoff instead of fdr");
    i->add_option("--theta", inf.theta, "Discretization threshold")->capture_default_str();
    i->add_option("--min-support", inf.min_support, "Minimum time points per conditioning cell")
        ->capture_default_str();
    i->add_flag("--pool-windows", inf.pool_windows, "Average over causes of the effect across windows");
    i->add_option("--hypotheses", inf.hypotheses, "File of leads-to formulas instead of pairwise");
    i->add_option("--bins", inf.bins, "Histogram bins for the density fit")->capture_default_str();
    i->add_option("--degree", inf.degree, "Polynomial degree for the density fit")->capture_default_str();
    i->get_option("--manual-z")->excludes("--manual-epsilon");

    GrangerArgs gr;
    auto* g = app.add_subcommand("granger", "Pairwise Granger tests labeled by local fdr or Benjamini-Hochberg");
    g->add_option("--input", gr.input, "Returns CSV")->required();
    g->add_option("--out", gr.out, "Output directory")->required();
    g->add_option("--lags", gr.lags, "Lag orders to test")->delimiter(',')->capture_default_str();
    g->add_option("--fdr", gr.fdr, "Local fdr threshold")->capture_default_str();
    g->add_option("--null", gr.null, "empirical or theoretical")->capture_default_str();
    g->add_option("--bh", gr.bh, "Benjamini-Hochberg level instead of local fdr");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Score found relations against ground truth");
    e->add_option("--truth", ev.truth, "Ground-truth CSV")->required();
    e->add_option("--found", ev.found, "Relations CSV for period 1 and optionally period 2")->required();
    e->add_option("--method", ev.method, "Method label")->capture_default_str();
    e->add_option("--scenario", ev.scenario, "Scenario label")->capture_default_str();
    e->add_option("--out", ev.out, "Metrics CSV");
    e->add_flag("--append", ev.append, "Append rows to an existing metrics CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return kExitUsage;
    }

    try {
        if (s->parsed()) return run_simulate(sim);
        if (i->parsed()) return run_infer(inf);
        if (g->parsed()) return run_granger_cmd(gr);
        if (e->parsed()) return run_evaluate(ev);
    } catch (const UsageError& ex) {
        std::cerr << "usage error: " << ex.what() << '\n';
        return kExitUsage;
    } catch (const ParseError& ex) {
        std::cerr << "parse error: " << ex.what() << '\n';
        return kExitData;
    } catch (const DataError& ex) {
        std::cerr << "data error: " << ex.what() << '\n';
        return kExitData;
    } catch (const NumericalError& ex) {
        std::cerr << "numerical error: " << ex.what() << '\n';
        return kExitData;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
