// obstacle-kit: configuration-driven runner for the parabolic obstacle and
// switching solvers, with Monte Carlo certification.

#include <CLI11.hpp>

#include <cstdio>

#include "obk/config.hpp"

namespace {

int run_kind(const std::string& config_path, const std::string& out_dir, int threads,
             const std::string& against, obk::ExperimentKind expect,
             const char* subcommand) {
    try {
        obk::ExperimentConfig cfg = obk::load_config(config_path);
        if (cfg.kind != expect) {
            std::fprintf(stderr, "{\"error\":\"validation\",\"message\":\"config kind does not match subcommand %s\"}\n",
                         subcommand);
            return 3;
        }
        obk::RunResult rr = obk::run_experiment(cfg, out_dir, threads, against);
        if (rr.exit_code != 0)
            std::fprintf(stderr, "{\"error\":\"%s\",\"message\":\"%s\"}\n",
                         rr.exit_code == 3 ? "validation" : "solver", rr.error.c_str());
        else
            for (const auto& o : rr.outputs) std::printf("%s\n", o.c_str());
        return rr.exit_code;
    } catch (const obk::ValidationError& e) {
        std::fprintf(stderr, "{\"error\":\"validation\",\"message\":\"%s\"}\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "{\"error\":\"solver\",\"message\":\"%s\"}\n", e.what());
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"obstacle-kit: solvers for parabolic obstacle problems with measure data, "
                 "two-barrier problems and optimal switching, with Monte Carlo certification"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", out_csv, against, report_path;
    int threads = 0;

    auto add_common = [&](CLI::App* sub, bool with_against = false) {
        sub->add_option("--config", config_path, "experiment config JSON")->required();
        sub->add_option("--out-dir", out_dir, "output directory (default: .)");
        sub->add_option("--threads", threads, "worker cap (default: OBSTACLE_KIT_THREADS or hardware)");
        if (with_against)
            sub->add_option("--against", against, "reference u CSV for the certification bands");
    };

    CLI::App* pde = app.add_subcommand("solve-pde", "unconstrained backward solve");
    add_common(pde);
    pde->add_option("--out", out_csv, "alias: directory for u.csv (same as --out-dir)");

    CLI::App* obst = app.add_subcommand("solve-obstacle", "one- or two-barrier obstacle solve");
    add_common(obst);
    std::string out_u, out_nu;
    obst->add_option("--out-u", out_u, "path for the u CSV (default <out-dir>/u.csv)");
    obst->add_option("--out-nu", out_nu, "path for the nu CSV (default <out-dir>/nu.csv)");
    obst->add_option("--report", report_path, "path for the report JSON (default <out-dir>/report.json)");

    CLI::App* sw = app.add_subcommand("solve-switching", "N-mode switching system solve");
    add_common(sw);

    CLI::App* cert = app.add_subcommand("certify", "Monte Carlo / tree certification");
    add_common(cert, true);
    cert->add_option("--report", report_path, "path for the report JSON");

    CLI::App* rep = app.add_subcommand("report", "pretty-print a report.json");
    rep->add_option("--run", report_path, "report.json path or run directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (pde->parsed()) {
        if (!out_csv.empty()) out_dir = out_csv;
        return run_kind(config_path, out_dir, threads, "", obk::ExperimentKind::pde, "solve-pde");
    }
    if (obst->parsed()) {
        try {
            obk::ExperimentConfig cfg = obk::load_config(config_path);
            if (cfg.kind != obk::ExperimentKind::obstacle1 &&
                cfg.kind != obk::ExperimentKind::obstacle2) {
                std::fprintf(stderr, "{\"error\":\"validation\",\"message\":\"config kind must be obstacle1 or obstacle2\"}\n");
                return 3;
            }
            obk::RunResult rr = obk::run_experiment(cfg, out_dir, threads);
            if (rr.exit_code != 0) {
                std::fprintf(stderr, "{\"error\":\"%s\",\"message\":\"%s\"}\n",
                             rr.exit_code == 3 ? "validation" : "solver", rr.error.c_str());
                return rr.exit_code;
            }
            // optional renames for the alternate flag spellings
            auto maybe_move = [&](const std::string& from, const std::string& to) {
                if (!to.empty() && to != from) std::rename(from.c_str(), to.c_str());
            };
            maybe_move(out_dir + "/u.csv", out_u);
            maybe_move(out_dir + "/nu.csv", out_nu);
            maybe_move(out_dir + "/report.json", report_path);
            for (const auto& o : rr.outputs) std::printf("%s\n", o.c_str());
            return 0;
        } catch (const obk::ValidationError& e) {
            std::fprintf(stderr, "{\"error\":\"validation\",\"message\":\"%s\"}\n", e.what());
            return 3;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "{\"error\":\"solver\",\"message\":\"%s\"}\n", e.what());
            return 2;
        }
    }
    if (sw->parsed())
        return run_kind(config_path, out_dir, threads, "", obk::ExperimentKind::switching,
                        "solve-switching");
    if (cert->parsed()) {
        const int rc = run_kind(config_path, out_dir, threads, against,
                                obk::ExperimentKind::certify, "certify");
        if (rc == 0 && !report_path.empty())
            std::rename((out_dir + "/report.json").c_str(), report_path.c_str());
        return rc;
    }
    if (rep->parsed()) {
        std::string p = report_path;
        if (p.find(".json") == std::string::npos) p += "/report.json";
        return obk::print_report(p);
    }
    return 0;
}
