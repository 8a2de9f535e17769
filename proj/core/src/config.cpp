#include "obk/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace obk {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const char* where, const std::set<std::string>& allowed,
                  const std::set<std::string>& required = {}) {
    if (!obj.is_object()) throw ValidationError(std::string(where) + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ValidationError(std::string(where) + ": unknown key '" + it.key() + "'");
    for (const auto& k : required)
        if (!obj.count(k))
            throw ValidationError(std::string(where) + ": missing key '" + k + "'");
}

double number(const json& v, const char* where) {
    if (!v.is_number()) throw ValidationError(std::string(where) + ": expected a number");
    return v.get<double>();
}

double number_or(const json& obj, const char* key, double dflt) {
    return obj.count(key) ? number(obj.at(key), key) : dflt;
}

/// Spatial profile g(x).
std::function<double(double)> space_profile(const json& spec, const Grid& grid,
                                            const char* where) {
    require_keys(spec, where, {"kind", "value", "amplitude", "cap", "a0", "slope", "x0", "width"},
                 {"kind"});
    const std::string kind = spec.at("kind").get<std::string>();
    const double xmin = grid.x_min, L = grid.x_max - grid.x_min;
    if (kind == "constant") {
        const double v = number(spec.at("value"), where);
        return [v](double) { return v; };
    }
    if (kind == "sin_pi") {
        const double a = number_or(spec, "amplitude", 1.0);
        return [a, xmin, L](double x) { return a * std::sin(M_PI * (x - xmin) / L); };
    }
    if (kind == "capped_sin") {
        const double a = number_or(spec, "amplitude", 1.0);
        const double cap = number(spec.at("cap"), where);
        return [a, cap, xmin, L](double x) {
            return std::min(a * std::sin(M_PI * (x - xmin) / L), cap);
        };
    }
    if (kind == "linear") {
        const double a0 = number_or(spec, "a0", 0.0);
        const double s = number_or(spec, "slope", 0.0);
        return [a0, s](double x) { return a0 + s * x; };
    }
    if (kind == "bump") {
        const double a = number_or(spec, "amplitude", 1.0);
        const double x0 = number(spec.at("x0"), where);
        const double w = number_or(spec, "width", 0.1);
        return [a, x0, w](double x) {
            const double r = (x - x0) / w;
            return std::abs(r) < 1.0 ? a * (1.0 - r * r) : 0.0;
        };
    }
    throw ValidationError(std::string(where) + ": unknown spatial profile kind '" + kind + "'");
}

std::function<double(double)> time_profile(const json& spec, const char* where) {
    require_keys(spec, where, {"kind", "value", "a0", "slope", "amplitude", "omega"}, {"kind"});
    const std::string kind = spec.at("kind").get<std::string>();
    if (kind == "constant") {
        const double v = number(spec.at("value"), where);
        return [v](double) { return v; };
    }
    if (kind == "linear") {
        const double a0 = number_or(spec, "a0", 0.0);
        const double s = number_or(spec, "slope", 0.0);
        return [a0, s](double t) { return a0 + s * t; };
    }
    if (kind == "sinusoidal") {
        const double a0 = number_or(spec, "a0", 0.0);
        const double amp = number_or(spec, "amplitude", 1.0);
        const double om = number_or(spec, "omega", 1.0);
        return [a0, amp, om](double t) { return a0 + amp * std::sin(om * t); };
    }
    throw ValidationError(std::string(where) + ": unknown time profile kind '" + kind + "'");
}

/// Space-time profile h(t,x): constant | product g(x)*q(t) | spatial-only.
std::function<double(double, double)> spacetime_profile(const json& spec, const Grid& grid,
                                                        const char* where) {
    require_keys(spec, where,
                 {"kind", "value", "amplitude", "cap", "a0", "slope", "x0", "width", "space",
                  "time"},
                 {"kind"});
    const std::string kind = spec.at("kind").get<std::string>();
    if (kind == "product") {
        auto g = space_profile(spec.at("space"), grid, where);
        auto q = time_profile(spec.at("time"), where);
        return [g, q](double t, double x) { return g(x) * q(t); };
    }
    auto g = space_profile(spec, grid, where);
    return [g](double, double x) { return g(x); };
}

FormCoefficients parse_coefficients(const json& spec, const Grid& grid) {
    require_keys(spec, "coefficients",
                 {"kind", "a", "b", "a_floor", "a0", "a1", "b0", "b1", "a_amp", "b_amp", "omega",
                  "path"},
                 {"kind"});
    const std::string kind = spec.at("kind").get<std::string>();
    FormCoefficients c;
    c.a_floor = number_or(spec, "a_floor", 1e-8);
    if (kind == "constant") {
        const double a = number(spec.at("a"), "coefficients.a");
        const double b = number_or(spec, "b", 0.0);
        c.a = [a](double, double) { return a; };
        c.b = [b](double, double) { return b; };
        return c;
    }
    if (kind == "linear-in-t") {
        const double a0 = number(spec.at("a0"), "coefficients.a0");
        const double a1 = number_or(spec, "a1", 0.0);
        const double b0 = number_or(spec, "b0", 0.0);
        const double b1 = number_or(spec, "b1", 0.0);
        c.a = [a0, a1](double t, double) { return a0 + a1 * t; };
        c.b = [b0, b1](double t, double) { return b0 + b1 * t; };
        return c;
    }
    if (kind == "sinusoidal") {
        const double a0 = number(spec.at("a0"), "coefficients.a0");
        const double aa = number_or(spec, "a_amp", 0.0);
        const double b0 = number_or(spec, "b0", 0.0);
        const double ba = number_or(spec, "b_amp", 0.0);
        const double om = number_or(spec, "omega", 1.0);
        c.a = [a0, aa, om](double t, double) { return a0 + aa * std::sin(om * t); };
        c.b = [b0, ba, om](double t, double) { return b0 + ba * std::sin(om * t); };
        return c;
    }
    if (kind == "csv") {
        // per-(k,i) sample table, columns k,i,a,b
        const std::string path = spec.at("path").get<std::string>();
        std::ifstream in(path);
        if (!in) throw ValidationError("coefficients.csv: cannot open " + path);
        const int nn = grid.n_nodes();
        auto table_a = std::make_shared<std::vector<double>>(
            static_cast<size_t>((grid.n_t + 1) * nn), 0.0);
        auto table_b = std::make_shared<std::vector<double>>(
            static_cast<size_t>((grid.n_t + 1) * nn), 0.0);
        std::string line;
        std::getline(in, line);   // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string cell;
            int k, i;
            double av, bv;
            std::getline(ls, cell, ','); k = std::stoi(cell);
            std::getline(ls, cell, ','); i = std::stoi(cell);
            std::getline(ls, cell, ','); av = std::stod(cell);
            std::getline(ls, cell, ','); bv = std::stod(cell);
            if (k < 0 || k > grid.n_t || i < 0 || i >= nn)
                throw ValidationError("coefficients.csv: index out of range");
            (*table_a)[static_cast<size_t>(k * nn + i)] = av;
            (*table_b)[static_cast<size_t>(k * nn + i)] = bv;
        }
        auto lookup = [nn, grid](const std::vector<double>& tab, double t, double x) {
            const int k = grid.nearest_time(t);
            const double s = (x - grid.x_min) / grid.dx();
            int i = static_cast<int>(std::floor(s));
            i = std::max(0, std::min(nn - 2, i));
            const double w = s - i;
            return (1.0 - w) * tab[static_cast<size_t>(k * nn + i)] +
                   w * tab[static_cast<size_t>(k * nn + i + 1)];
        };
        c.a = [table_a, lookup](double t, double x) { return lookup(*table_a, t, x); };
        c.b = [table_b, lookup](double t, double x) { return lookup(*table_b, t, x); };
        return c;
    }
    throw ValidationError("coefficients: unknown kind '" + kind + "'");
}

MeasureData parse_measure(const json& spec, const Grid& grid) {
    MeasureData mu;
    if (!spec.is_array()) throw ValidationError("measure: expected an array of components");
    for (const auto& comp : spec) {
        require_keys(comp, "measure component",
                     {"kind", "sign", "density", "t0", "x0", "mass", "profile", "rate"},
                     {"kind"});
        const std::string kind = comp.at("kind").get<std::string>();
        const double sign = number_or(comp, "sign", 1.0);
        if (kind == "ac") {
            auto d = spacetime_profile(comp.at("density"), grid, "measure.ac.density");
            if (mu.ac) {
                auto prev = mu.ac;
                mu.ac = [prev, d, sign](double t, double x) { return prev(t, x) + sign * d(t, x); };
            } else {
                mu.ac = [d, sign](double t, double x) { return sign * d(t, x); };
            }
        } else if (kind == "time_atom") {
            auto g = space_profile(comp.at("profile"), grid, "measure.time_atom.profile");
            mu.time_atoms.push_back(
                {number(comp.at("t0"), "t0"), [g, sign](double x) { return sign * g(x); }});
        } else if (kind == "space_atom") {
            auto q = time_profile(comp.at("rate"), "measure.space_atom.rate");
            mu.space_atoms.push_back(
                {number(comp.at("x0"), "x0"), [q, sign](double t) { return sign * q(t); }});
        } else if (kind == "point") {
            mu.point_atoms.push_back({number(comp.at("t0"), "t0"), number(comp.at("x0"), "x0"),
                                      sign * number(comp.at("mass"), "mass")});
        } else {
            throw ValidationError("measure: unknown component kind '" + kind + "'");
        }
    }
    return mu;
}

Reaction parse_reaction(const json& spec, const Grid& grid) {
    require_keys(spec, "reaction", {"kind", "value", "constant", "slope", "rate", "scale", "space"},
                 {"kind"});
    const std::string kind = spec.at("kind").get<std::string>();
    Reaction r;
    if (kind == "zero") return r;
    if (kind == "constant") {
        const double v = number(spec.at("value"), "reaction.value");
        r.f = [v](double, double, double) { return v; };
        r.lambda = 0.0;
        return r;
    }
    if (kind == "affine") {
        const double c0 = number_or(spec, "constant", 0.0);
        const double c1 = number_or(spec, "slope", 0.0);
        r.f = [c0, c1](double, double, double y) { return c0 + c1 * y; };
        r.lambda = std::max(c1, 0.0);
        r.lipschitz_hint = std::abs(c1);
        return r;
    }
    if (kind == "decay") {
        const double rate = number(spec.at("rate"), "reaction.rate");
        r.f = [rate](double, double, double y) { return -rate * y; };
        r.lambda = std::max(-rate, 0.0);
        r.lipschitz_hint = std::abs(rate);
        return r;
    }
    if (kind == "cubic") {
        const double s = number_or(spec, "scale", 1.0);
        r.f = [s](double, double, double y) { return -s * y * y * y; };
        r.lambda = 0.0;
        return r;
    }
    if (kind == "source") {
        auto g = spacetime_profile(spec.at("space"), grid, "reaction.space");
        r.f = [g](double t, double x, double) { return g(t, x); };
        r.lambda = 0.0;
        return r;
    }
    throw ValidationError("reaction: unknown kind '" + kind + "'");
}

Slice parse_terminal(const json& spec, const Grid& grid) {
    auto g = space_profile(spec, grid, "terminal");
    Slice phi(static_cast<size_t>(grid.n_nodes()));
    for (int i = 0; i < grid.n_nodes(); ++i) phi[static_cast<size_t>(i)] = g(grid.node(i));
    return phi;
}

std::shared_ptr<Barrier> parse_barrier(const json& spec, const Grid& grid, bool lower) {
    if (spec.is_object() && spec.count("kind") && spec.at("kind") == "none")
        return std::make_shared<Barrier>(Barrier::none(
            lower ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity()));
    require_keys(spec, "barrier", {"segments"}, {"segments"});
    std::vector<Barrier::Segment> segs;
    for (const auto& s : spec.at("segments")) {
        require_keys(s, "barrier.segment", {"t_start", "profile"}, {"t_start", "profile"});
        auto prof = spacetime_profile(s.at("profile"), grid, "barrier.segment.profile");
        segs.push_back({number(s.at("t_start"), "t_start"), prof});
    }
    return std::make_shared<Barrier>(Barrier::from_segments(std::move(segs), grid));
}

SwitchingProblem parse_switching(const json& spec, const Grid& grid) {
    require_keys(spec, "switching", {"modes", "adjacency", "cost", "cost_floor"},
                 {"modes", "adjacency", "cost"});
    SwitchingProblem p;
    for (const auto& m : spec.at("modes")) {
        require_keys(m, "switching.mode", {"terminal", "reaction", "measure"}, {"terminal"});
        SwitchingProblem::Mode mode;
        mode.phi = parse_terminal(m.at("terminal"), grid);
        if (m.count("reaction")) {
            Reaction r = parse_reaction(m.at("reaction"), grid);
            if (!r.zero()) {
                auto f = r.f;
                mode.f = [f](double t, double x, std::span<const double>) { return f(t, x, 0.0); };
            }
            mode.f_lambda = r.lambda;
        }
        if (m.count("measure")) mode.mu = parse_measure(m.at("measure"), grid);
        p.modes.push_back(std::move(mode));
    }
    for (const auto& row : spec.at("adjacency")) {
        std::vector<int> a;
        for (const auto& v : row) a.push_back(v.get<int>());
        p.adjacency.push_back(std::move(a));
    }
    const auto& cost = spec.at("cost");
    require_keys(cost, "switching.cost", {"kind", "value", "matrix"}, {"kind"});
    if (cost.at("kind") == "constant") {
        const double v = number(cost.at("value"), "cost.value");
        p.cost = [v](int, int, double, double) { return v; };
        p.cost_floor = number_or(spec, "cost_floor", v);
    } else if (cost.at("kind") == "matrix") {
        auto mat = std::make_shared<std::vector<std::vector<double>>>();
        for (const auto& row : cost.at("matrix")) {
            std::vector<double> r;
            for (const auto& v : row) r.push_back(v.get<double>());
            mat->push_back(std::move(r));
        }
        p.cost = [mat](int j, int i, double, double) { return (*mat)[static_cast<size_t>(j)][static_cast<size_t>(i)]; };
        double floor = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < mat->size(); ++j)
            for (size_t i = 0; i < (*mat)[j].size(); ++i)
                if (i != j) floor = std::min(floor, (*mat)[j][i]);
        p.cost_floor = number_or(spec, "cost_floor", floor);
    } else {
        throw ValidationError("switching.cost: unknown kind");
    }
    p.f_depends_on_y = false;
    return p;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
    require_keys(root, "config",
                 {"kind", "name", "grid", "coefficients", "measure", "reaction", "terminal",
                  "barrier", "barrier_upper", "penalty_ladder", "switching", "start_mode",
                  "eps_switch", "picard_tol", "tolerances", "mc", "certify_target"},
                 {"kind", "grid"});

    ExperimentConfig cfg;
    const std::string kind = root.at("kind").get<std::string>();
    if (kind == "pde") cfg.kind = ExperimentKind::pde;
    else if (kind == "obstacle1") cfg.kind = ExperimentKind::obstacle1;
    else if (kind == "obstacle2") cfg.kind = ExperimentKind::obstacle2;
    else if (kind == "switching") cfg.kind = ExperimentKind::switching;
    else if (kind == "certify") cfg.kind = ExperimentKind::certify;
    else throw ValidationError("config: unknown kind '" + kind + "'");
    if (root.count("name")) cfg.name = root.at("name").get<std::string>();

    {
        const auto& g = root.at("grid");
        require_keys(g, "grid", {"x_min", "x_max", "n_x", "T", "n_t"},
                     {"x_min", "x_max", "n_x", "T", "n_t"});
        cfg.grid.x_min = number(g.at("x_min"), "grid.x_min");
        cfg.grid.x_max = number(g.at("x_max"), "grid.x_max");
        cfg.grid.n_x = g.at("n_x").get<int>();
        cfg.grid.horizon = number(g.at("T"), "grid.T");
        cfg.grid.n_t = g.at("n_t").get<int>();
        cfg.grid.validate();
    }

    if (root.count("coefficients"))
        cfg.coefficients = parse_coefficients(root.at("coefficients"), cfg.grid);
    else {
        cfg.coefficients.a = [](double, double) { return 1.0; };
        cfg.coefficients.b = [](double, double) { return 0.0; };
        cfg.coefficients.a_floor = 0.5;
    }
    if (root.count("measure")) cfg.measure = parse_measure(root.at("measure"), cfg.grid);
    if (root.count("reaction")) cfg.reaction = parse_reaction(root.at("reaction"), cfg.grid);
    cfg.terminal = root.count("terminal")
                       ? parse_terminal(root.at("terminal"), cfg.grid)
                       : Slice(static_cast<size_t>(cfg.grid.n_nodes()), 0.0);
    if (root.count("barrier")) cfg.barrier_lower = parse_barrier(root.at("barrier"), cfg.grid, true);
    if (root.count("barrier_upper"))
        cfg.barrier_upper = parse_barrier(root.at("barrier_upper"), cfg.grid, false);
    if (root.count("penalty_ladder")) {
        for (const auto& v : root.at("penalty_ladder"))
            cfg.penalty_ladder.push_back(v.get<double>());
        for (double n : cfg.penalty_ladder)
            if (!(n >= 0)) throw ValidationError("penalty_ladder: levels must be >= 0");
    }
    if (root.count("switching")) cfg.switching = parse_switching(root.at("switching"), cfg.grid);
    if (root.count("start_mode")) cfg.start_mode = root.at("start_mode").get<int>();
    if (root.count("eps_switch")) cfg.eps_switch = number(root.at("eps_switch"), "eps_switch");
    if (root.count("picard_tol")) cfg.picard_tol = number(root.at("picard_tol"), "picard_tol");
    if (root.count("tolerances")) {
        const auto& t = root.at("tolerances");
        require_keys(t, "tolerances", {"step_tol", "max_newton"});
        cfg.solver.step_tol = number_or(t, "step_tol", cfg.solver.step_tol);
        if (t.count("max_newton")) cfg.solver.max_newton = t.at("max_newton").get<int>();
    }
    if (!(cfg.solver.step_tol > 0) || !(cfg.picard_tol > 0) || !(cfg.eps_switch > 0))
        throw ValidationError("config: tolerances must be > 0");
    if (root.count("mc")) {
        const auto& m = root.at("mc");
        require_keys(m, "mc", {"seed", "n_paths", "substeps", "tree_depth", "perturbations"});
        if (m.count("seed")) cfg.mc.seed = m.at("seed").get<std::uint64_t>();
        if (m.count("n_paths")) cfg.mc.n_paths = m.at("n_paths").get<int>();
        if (m.count("substeps")) cfg.mc.substeps = m.at("substeps").get<int>();
        if (m.count("tree_depth")) cfg.mc.tree_depth = m.at("tree_depth").get<int>();
        if (m.count("perturbations")) cfg.mc.perturbations = m.at("perturbations").get<int>();
    }
    if (root.count("certify_target")) {
        const std::string t = root.at("certify_target").get<std::string>();
        if (t == "obstacle1") cfg.certify_target = ExperimentKind::obstacle1;
        else if (t == "pde") cfg.certify_target = ExperimentKind::pde;
        else if (t == "switching") cfg.certify_target = ExperimentKind::switching;
        else throw ValidationError("certify_target: unknown value");
    }

    // Validation gates that must fail before any solve starts.
    if (cfg.grid.dt() * cfg.reaction.lambda >= 1.0)
        throw ValidationError("config: dt * lambda_f >= 1 (monotone-implicit solvability gate)");

    cfg.canonical = root.dump();
    cfg.hash = fnv1a(cfg.canonical);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str());
}

} // namespace obk
