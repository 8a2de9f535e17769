#ifndef OBK_CONFIG_HPP
#define OBK_CONFIG_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "obk/barriers.hpp"
#include "obk/forms.hpp"
#include "obk/grid.hpp"
#include "obk/measures.hpp"
#include "obk/pde.hpp"
#include "obk/switching.hpp"

namespace obk {

enum class ExperimentKind { pde, obstacle1, obstacle2, switching, certify };

struct McSettings {
    std::uint64_t seed = 1;
    int n_paths = 10000;
    int substeps = 1;
    int tree_depth = 0;          // 0: skip the tree oracle
    int perturbations = 0;       // suboptimality probes in certify
};

/// Schema-validated experiment description. Unknown keys are rejected; all
/// tolerances must be positive.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::pde;
    std::string name = "experiment";
    Grid grid;
    FormCoefficients coefficients;
    MeasureData measure;
    Reaction reaction;
    Slice terminal;
    std::shared_ptr<Barrier> barrier_lower, barrier_upper;
    std::vector<double> penalty_ladder;
    std::optional<SwitchingProblem> switching;
    int start_mode = 0;
    double eps_switch = 1e-6;
    double picard_tol = 1e-10;
    SolverOptions solver;
    McSettings mc;
    ExperimentKind certify_target = ExperimentKind::obstacle1;

    std::string canonical;       // normalized JSON of the config
    std::uint64_t hash = 0;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

struct RunResult {
    int exit_code = 0;           // 0 ok, 2 solver error, 3 validation error
    std::string error;
    std::vector<std::string> outputs;
};

/// Dispatch a config to the module solvers and write u/nu CSVs, diagnostics
/// JSON and a run manifest into out_dir. `threads` <= 0 keeps the ambient
/// worker cap. `against_csv` supplies the reference field for certify runs.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                         int threads = 0, const std::string& against_csv = {});

/// Pretty-print a report.json produced by run_experiment.
int print_report(const std::string& report_path);

} // namespace obk

#endif
