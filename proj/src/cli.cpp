#include "mgtwin/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgtwin/config_io.hpp"
#include "mgtwin/dataset.hpp"
#include "mgtwin/engine.hpp"
#include "mgtwin/scenarios.hpp"
#include "mgtwin/validate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mgtwin {

inline constexpr const char* kVersion = "0.1.0";

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::NonIntegralGrid:
    case ErrorKind::StepTooLarge:
    case ErrorKind::UnknownClass: return exit_code::config;
    case ErrorKind::Io: return exit_code::io;
    case ErrorKind::SchemaMismatch:
    case ErrorKind::Parse:
    case ErrorKind::EmptyDataset: return exit_code::schema;
    case ErrorKind::AllInvalid: return exit_code::repair;
    default: return exit_code::failure;
    }
}

std::vector<int> parse_selection(const std::string& text) {
    std::set<int> ids;
    auto bad = [&](const std::string& tok) {
        return Error(ErrorKind::UnknownClass, "unknown scenario selection '" + tok + "' (expected all or ids 0..10)");
    };
    auto to_id = [&](const std::string& tok) {
        std::size_t used = 0;
        int v = -1;
        try {
            v = std::stoi(tok, &used);
        } catch (const std::exception&) {
            throw bad(tok);
        }
        if (used != tok.size() || v < 0 || v >= kNumClasses) throw bad(tok);
        return v;
    };
    std::stringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
        if (tok.empty()) continue;
        if (tok == "all") {
            for (int c = 0; c < kNumClasses; ++c) ids.insert(c);
            continue;
        }
        const auto dash = tok.find('-', 1);
        if (dash != std::string::npos) {
            const int a = to_id(tok.substr(0, dash)), b = to_id(tok.substr(dash + 1));
            if (b < a) throw bad(tok);
            for (int c = a; c <= b; ++c) ids.insert(c);
        } else {
            ids.insert(to_id(tok));
        }
    }
    if (ids.empty()) throw bad(text);
    return {ids.begin(), ids.end()};
}

std::string scenario_file_name(int class_id) {
    return "scenario_" + std::to_string(class_id) + "_" + scenario_name(class_id) + ".csv";
}

std::optional<int> class_from_file_name(const fs::path& path) {
    static const std::regex shape(R"(scenario_(\d+)_.*\.csv)");
    std::smatch m;
    const std::string name = path.filename().string();
    if (!std::regex_match(name, m, shape)) return std::nullopt;
    const int id = std::stoi(m[1].str());
    if (id < 0 || id >= kNumClasses) return std::nullopt;
    return id;
}

namespace {

std::string feedback_file_name(int class_id) {
    auto name = scenario_file_name(class_id);
    return name.substr(0, name.size() - 4) + "_feedback.csv";
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_json(const json& doc, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot open for writing: " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw Error(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
}

// Runs task(i) for i in [0, n) on up to `jobs` threads. Returns the first
// captured error kind per task (nullopt on success).
struct TaskOutcome {
    std::optional<ErrorKind> error;
    std::string message;
};

std::vector<TaskOutcome> run_parallel(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
    std::vector<TaskOutcome> out(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                task(i);
            } catch (const Error& e) {
                out[i] = {e.kind(), e.what()};
            } catch (const std::exception& e) {
                out[i] = {ErrorKind::Io, e.what()};
            }
        }
    };
    const int threads = std::clamp<int>(jobs, 1, static_cast<int>(std::max<std::size_t>(1, n)));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

int worst_exit(const std::vector<TaskOutcome>& outcomes) {
    int code = exit_code::ok;
    for (const auto& o : outcomes)
        if (o.error) code = std::max(code, exit_code_for(*o.error));
    return code;
}

struct GlobalOptions {
    std::string config_path;
    int jobs = 0;
};

ValidatedConfig load_effective_config(const GlobalOptions& g, std::optional<std::uint64_t> seed) {
    MicrogridConfig cfg = g.config_path.empty() ? MicrogridConfig::defaults() : load_config(g.config_path);
    if (seed) cfg.scenario.noise_seed = *seed;
    return validate_config(cfg);
}

int job_count(const GlobalOptions& g) {
    if (g.jobs > 0) return g.jobs;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::mutex g_print;

void say(const std::string& line) {
    std::lock_guard<std::mutex> lock(g_print);
    std::cout << line << std::endl;
}

void complain(const std::string& line) {
    std::lock_guard<std::mutex> lock(g_print);
    std::cerr << "mgtwin: " << line << std::endl;
}

// ---- generate -----------------------------------------------------------------

struct GenerateArgs {
    std::string out = ".";
    std::string scenarios = "all";
    std::optional<std::uint64_t> seed;
};

int cmd_generate(const GlobalOptions& g, const GenerateArgs& a) {
    const auto ids = parse_selection(a.scenarios);
    const ValidatedConfig cfg = load_effective_config(g, a.seed);
    const fs::path out(a.out);
    ensure_dir(out);

    const auto outcomes = run_parallel(ids.size(), job_count(g), [&](std::size_t i) {
        const int id = ids[i];
        const ScenarioSpec spec = builtin_scenario(id, cfg.config());
        const fs::path path = out / scenario_file_name(id);
        CsvWriter writer(path);
        writer.write_line(csv_header());
        const RowSink sink = [&](SampleIndex, const Row& row) { writer.write_row(row); };
        if (spec.delay) {
            const FeedbackTrace trace = record_feedback(cfg, spec, sink);
            write_feedback_csv(trace, cfg->grid.dt, out / feedback_file_name(id));
        } else {
            run_scenario(cfg, spec, sink);
        }
        writer.close();
        say("generated " + path.string() + " (" + std::to_string(writer.rows_written()) + " rows)");
    });

    json files = json::array();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (outcomes[i].error) {
            complain(scenario_file_name(ids[i]) + ": " + outcomes[i].message);
            continue;
        }
        json f{{"class_id", ids[i]}, {"name", scenario_name(ids[i])}, {"path", scenario_file_name(ids[i])},
               {"rows", cfg.sample_count()}};
        if (builtin_scenario(ids[i], cfg.config()).delay) f["feedback"] = feedback_file_name(ids[i]);
        files.push_back(f);
    }
    const json manifest{{"tool", "mgtwin"},
                        {"version", kVersion},
                        {"timestamp", utc_timestamp()},
                        {"config_path", g.config_path},
                        {"output_dir", a.out},
                        {"scenarios", ids},
                        {"seed", cfg->scenario.noise_seed},
                        {"config", config_to_json(cfg.config())},
                        {"catalog", catalog_json(cfg.config())},
                        {"files", files}};
    write_json(manifest, out / "manifest.json");
    return worst_exit(outcomes);
}

// ---- clean --------------------------------------------------------------------

struct CleanArgs {
    std::string input;
    std::string out;
    std::string ranges;
    std::string report;
};

bool is_raw_scenario(const fs::path& p) {
    const auto name = p.filename().string();
    auto ends_with = [&](const std::string& s) {
        return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    return class_from_file_name(p) && !ends_with("_clean.csv") && !ends_with("_feedback.csv");
}

std::vector<fs::path> scenario_files(const fs::path& input, bool want_clean) {
    if (!fs::exists(input)) throw Error(ErrorKind::Io, "no such file or directory: " + input.string());
    if (!fs::is_directory(input)) return {input};
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(input)) {
        const auto& p = entry.path();
        if (!entry.is_regular_file() || !class_from_file_name(p)) continue;
        const auto name = p.filename().string();
        const bool clean = name.size() > 10 && name.substr(name.size() - 10) == "_clean.csv";
        if (want_clean ? clean : is_raw_scenario(p)) out.push_back(p);
    }
    std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
        return std::make_pair(*class_from_file_name(a), a.filename()) <
               std::make_pair(*class_from_file_name(b), b.filename());
    });
    if (out.empty()) throw Error(ErrorKind::Io, "no scenario CSV files in " + input.string());
    return out;
}

int cmd_clean(const GlobalOptions& g, const CleanArgs& a) {
    const ValidatedConfig cfg = load_effective_config(g, std::nullopt);
    AdmissibleRanges ranges = AdmissibleRanges::defaults(cfg);
    if (!a.ranges.empty()) {
        std::ifstream in(a.ranges);
        if (!in) throw Error(ErrorKind::Io, "cannot open ranges file: " + a.ranges);
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw ConfigError({"ranges file " + a.ranges + ": " + e.what()});
        }
        ranges = ranges_from_json(doc, ranges);
    }
    const auto files = scenario_files(a.input, false);
    std::vector<RepairReport> reports(files.size());
    const auto outcomes = run_parallel(files.size(), job_count(g), [&](std::size_t i) {
        const fs::path& in = files[i];
        const fs::path dir = !a.out.empty() ? fs::path(a.out) : in.has_parent_path() ? in.parent_path() : ".";
        ensure_dir(dir);
        const std::string stem = in.stem().string();
        const fs::path out = dir / (stem + "_clean.csv");
        try {
            reports[i] = clean_csv_file(in, out, ranges);
        } catch (const Error& e) {
            std::error_code ec;
            fs::remove(out, ec);
            throw Error(e.kind(), in.string() + ": " + e.what());
        }
        json rep = report_to_json(reports[i]);
        rep["input"] = in.filename().string();
        rep["output"] = out.filename().string();
        write_json(rep, dir / (stem + "_repair.json"));
        say("cleaned " + in.string() + " -> " + out.string() + " (" +
            std::to_string(reports[i].total_repaired()) + " samples repaired)");
    });
    json all = json::array();
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (outcomes[i].error) {
            complain(outcomes[i].message);
            continue;
        }
        json rep = report_to_json(reports[i]);
        rep["input"] = files[i].string();
        all.push_back(rep);
    }
    if (!a.report.empty()) write_json({{"ranges", ranges_to_json(ranges)}, {"files", all}}, a.report);
    return worst_exit(outcomes);
}

// ---- validate -------------------------------------------------------------------

struct ValidateArgs {
    std::string input;
    std::string out;
    std::string report;
    std::string scenarios = "all";
    std::optional<int> as_class;
    bool use_clean = false;
    bool extracts = false;
};

fs::path feedback_for(const fs::path& csv, int class_id) {
    return csv.parent_path() / feedback_file_name(class_id);
}

int cmd_validate(const GlobalOptions& g, const ValidateArgs& a) {
    const ValidatedConfig cfg = load_effective_config(g, std::nullopt);
    const auto selected = parse_selection(a.scenarios);
    std::vector<fs::path> files;
    for (const auto& f : scenario_files(a.input, a.use_clean)) {
        const auto id = class_from_file_name(f);
        if (a.as_class || (id && std::binary_search(selected.begin(), selected.end(), *id))) files.push_back(f);
    }
    if (files.empty()) throw Error(ErrorKind::Io, "no scenario files selected in " + a.input);

    std::vector<ValidationReport> reports(files.size());
    const auto outcomes = run_parallel(files.size(), job_count(g), [&](std::size_t i) {
        const fs::path& in = files[i];
        const auto named = class_from_file_name(in);
        const int id = a.as_class ? *a.as_class : named.value_or(-1);
        if (id < 0 || id >= kNumClasses)
            throw Error(ErrorKind::UnknownClass, in.string() + ": cannot infer the scenario class (use --as)");
        const DatasetMatrix m = read_csv(in);
        std::optional<FeedbackTrace> trace;
        if (builtin_scenario(id, cfg.config()).delay && named) {
            const fs::path fb = feedback_for(in, *named);
            if (fs::exists(fb)) trace = read_feedback_csv(fb);
        }
        reports[i] = validate_scenario(m, id, cfg, {}, trace ? &*trace : nullptr);
        const fs::path dir = !a.out.empty() ? fs::path(a.out) : in.has_parent_path() ? in.parent_path() : ".";
        ensure_dir(dir);
        write_json(report_to_json(reports[i]), dir / (in.stem().string() + "_validation.json"));
        if (a.extracts) write_extracts_csv(reports[i], dir / (in.stem().string() + "_extracts.csv"));
    });

    std::ostringstream table;
    char line[256];
    std::snprintf(line, sizeof line, "%-36s %5s %-14s %10s %12s  %s\n", "file", "class", "scenario",
                  "onset", "onset_err_ms", "result");
    table << line;
    json rows = json::array();
    std::vector<std::string> failing;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const std::string name = files[i].filename().string();
        if (outcomes[i].error) {
            complain(outcomes[i].message);
            failing.push_back(name);
            std::snprintf(line, sizeof line, "%-36s %5s %-14s %10s %12s  ERROR\n", name.c_str(), "-", "-", "-", "-");
            table << line;
            rows.push_back({{"file", name}, {"passed", false}, {"error", outcomes[i].message}});
            continue;
        }
        const auto& r = reports[i];
        const std::string onset = r.label_onset ? std::to_string(*r.label_onset) : "-";
        std::string err = "-";
        if (r.summary.contains("onset_error_s")) {
            char b[32];
            std::snprintf(b, sizeof b, "%.3f", r.summary["onset_error_s"].get<double>() * 1e3);
            err = b;
        }
        std::string result = r.passed ? "PASS" : "FAIL";
        if (!r.passed) {
            failing.push_back(name);
            std::string why;
            for (const auto& f : r.failures()) why += (why.empty() ? "" : "; ") + f;
            result += " (" + why + ")";
        }
        std::snprintf(line, sizeof line, "%-36s %5d %-14s %10s %12s  ", name.c_str(), r.class_id,
                      r.scenario.c_str(), onset.c_str(), err.c_str());
        table << line << result << '\n';
        json magnitudes = json::object();
        for (const auto& d : r.detections) magnitudes[d.signal] = d.magnitude;
        rows.push_back({{"file", name},
                        {"class_id", r.class_id},
                        {"scenario", r.scenario},
                        {"passed", r.passed},
                        {"summary", r.summary},
                        {"magnitudes", magnitudes},
                        {"failures", r.failures()}});
    }
    std::cout << table.str();
    const fs::path report = !a.report.empty() ? fs::path(a.report)
                            : fs::is_directory(a.input) ? fs::path(a.input) / "validation_summary.json"
                            : fs::path(a.input).has_parent_path() ? fs::path(a.input).parent_path() / "validation_summary.json"
                                                                  : fs::path("validation_summary.json");
    write_json({{"all_passed", failing.empty()}, {"files", rows}}, report);
    if (!failing.empty()) {
        std::string list;
        for (const auto& f : failing) list += (list.empty() ? "" : ", ") + f;
        complain("validation failed: " + list);
    }
    const int errors = worst_exit(outcomes);
    if (errors != exit_code::ok) return errors;
    return failing.empty() ? exit_code::ok : exit_code::validation;
}

int cmd_catalog(const GlobalOptions& g) {
    const ValidatedConfig cfg = load_effective_config(g, std::nullopt);
    std::cout << catalog_json(cfg.config()).dump(2) << '\n';
    return exit_code::ok;
}

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"mgtwin: labeled microgrid disturbance datasets"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--config", g.config_path, "JSON config file")->envname("MG_CONFIG");
    app.add_option("--jobs", g.jobs, "parallel scenario pipelines")->envname("MG_JOBS")->check(CLI::NonNegativeNumber);

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "simulate scenarios and write CSVs");
    gen->add_option("--out", ga.out, "output directory");
    gen->add_option("--scenarios", ga.scenarios, "all, or ids such as 0,3,5-7");
    gen->add_option("--seed", ga.seed, "noise seed override");

    CleanArgs ca;
    auto* cln = app.add_subcommand("clean", "repair invalid samples");
    cln->add_option("input", ca.input, "CSV file or directory")->required();
    cln->add_option("--out", ca.out, "output directory (default: next to the input)");
    cln->add_option("--ranges", ca.ranges, "JSON admissible ranges");
    cln->add_option("--report", ca.report, "aggregate repair report JSON");

    ValidateArgs va;
    auto* val = app.add_subcommand("validate", "check scenario signatures");
    val->add_option("input", va.input, "CSV file or directory")->required();
    val->add_option("--out", va.out, "directory for per-file reports");
    val->add_option("--report", va.report, "summary JSON path");
    val->add_option("--scenarios", va.scenarios, "restrict to these class ids");
    val->add_option("--as", va.as_class, "expected class for every file")->check(CLI::Range(0, kNumClasses - 1));
    val->add_flag("--clean", va.use_clean, "validate the _clean.csv copies");
    val->add_flag("--extracts", va.extracts, "write plot-ready series CSVs");

    auto* cat = app.add_subcommand("catalog", "print the scenario catalog");

    for (auto* sub : {gen, cln, val, cat}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_code::ok : exit_code::config;
    }

    try {
        if (*gen) return cmd_generate(g, ga);
        if (*cln) return cmd_clean(g, ca);
        if (*val) return cmd_validate(g, va);
        return cmd_catalog(g);
    } catch (const ConfigError& e) {
        for (const auto& d : e.diagnostics()) complain("config: " + d);
        return exit_code::config;
    } catch (const Error& e) {
        complain(e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        complain(e.what());
        return exit_code::failure;
    }
}

} // namespace mgtwin
