#include "chainflow/config.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "chainflow/csv.hpp"
#include "chainflow/expr.hpp"

namespace chainflow {

using nlohmann::json;

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
    }
    ExperimentConfig c;
    try {
        if (j.contains("potential")) {
            const auto& p = j.at("potential");
            read_if(p, "kind", c.potential_kind);
            read_if(p, "param", c.potential_param);
        }
        if (j.contains("chain")) {
            const auto& p = j.at("chain");
            read_if(p, "N", c.n_list);
            read_if(p, "gamma", c.gamma);
            read_if(p, "dt_micro", c.dt_micro);
            read_if(p, "T_macro", c.t_macro);
            read_if(p, "snapshot_times", c.snapshot_times);
        }
        if (j.contains("ensemble")) {
            const auto& p = j.at("ensemble");
            read_if(p, "size", c.ensemble_size);
            read_if(p, "seed", c.seed);
            read_if(p, "antithetic", c.antithetic);
        }
        if (j.contains("initial")) {
            const auto& p = j.at("initial");
            read_if(p, "mode", c.initial_mode);
            read_if(p, "tau", c.initial_tau);
            read_if(p, "beta", c.initial_beta);
            read_if(p, "velocity", c.initial_velocity);
            read_if(p, "r", c.initial_r_expr);
            read_if(p, "p", c.initial_p_expr);
            read_if(p, "E", c.initial_e_expr);
            read_if(p, "csv", c.initial_csv);
        }
        if (j.contains("tension")) {
            const auto& p = j.at("tension");
            read_if(p, "expr", c.tension_expr);
            read_if(p, "constant", c.tension_constant);
        }
        if (j.contains("pde")) {
            const auto& p = j.at("pde");
            read_if(p, "M", c.m_list);
            read_if(p, "cfl", c.cfl);
            read_if(p, "eos_spacing", c.eos_spacing);
        }
        if (j.contains("blocks")) {
            const auto& p = j.at("blocks");
            read_if(p, "k", c.k_list);
            read_if(p, "b_factor", c.b_factor);
        }
        read_if(j, "test_functions", c.j_names);
        if (j.contains("thermo")) {
            const auto& p = j.at("thermo");
            read_if(p, "tau", c.thermo_tau);
            read_if(p, "pbar", c.thermo_pbar);
            read_if(p, "beta", c.thermo_beta);
        }
        if (j.contains("output")) read_if(j.at("output"), "dir", c.out_dir);
        read_if(j, "workers", c.workers);
    } catch (const json::exception& e) {
        throw ConfigError("<document>", std::string("type error: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    json j;
    j["potential"] = {{"kind", c.potential_kind}, {"param", c.potential_param}};
    j["chain"] = {{"N", c.n_list},
                  {"gamma", c.gamma},
                  {"dt_micro", c.dt_micro},
                  {"T_macro", c.t_macro},
                  {"snapshot_times", c.snapshot_times}};
    j["ensemble"] = {{"size", c.ensemble_size},
                     {"seed", c.seed},
                     {"antithetic", c.antithetic}};
    j["initial"] = {{"mode", c.initial_mode},   {"tau", c.initial_tau},
                    {"beta", c.initial_beta},   {"velocity", c.initial_velocity},
                    {"r", c.initial_r_expr},    {"p", c.initial_p_expr},
                    {"E", c.initial_e_expr},    {"csv", c.initial_csv}};
    j["tension"] = {{"expr", c.tension_expr}, {"constant", c.tension_constant}};
    j["pde"] = {{"M", c.m_list}, {"cfl", c.cfl}, {"eos_spacing", c.eos_spacing}};
    j["blocks"] = {{"k", c.k_list}, {"b_factor", c.b_factor}};
    j["test_functions"] = c.j_names;
    j["thermo"] = {{"tau", c.thermo_tau},
                   {"pbar", c.thermo_pbar},
                   {"beta", c.thermo_beta}};
    j["output"] = {{"dir", c.out_dir}};
    j["workers"] = c.workers;
    return j.dump(2);
}

void validate_config(const ExperimentConfig& c) {
    auto expect = [](bool ok, const std::string& field, const std::string& msg) {
        if (!ok) throw ConfigError(field, msg);
    };

    expect(c.potential_kind == "harmonic" || c.potential_kind == "coslattice" ||
               c.potential_kind == "fpu",
           "potential.kind", "unknown potential \"" + c.potential_kind + "\"");
    if (c.potential_kind == "coslattice")
        expect(c.potential_param > 0.0 && c.potential_param < 1.0, "potential.param",
               "coslattice amplitude must lie in (0,1)");
    if (c.potential_kind == "fpu")
        expect(c.potential_param > 0.0, "potential.param",
               "fpu coefficient must be positive");

    expect(!c.n_list.empty(), "chain.N", "need at least one chain size");
    for (std::size_t i = 0; i < c.n_list.size(); ++i)
        expect(c.n_list[i] >= 1, "chain.N[" + std::to_string(i) + "]",
               "chain size must be >= 1");
    expect(c.gamma >= 0.0, "chain.gamma", "noise strength must be >= 0");
    expect(c.dt_micro >= 0.0, "chain.dt_micro", "time step must be >= 0 (0 = auto)");
    expect(c.t_macro > 0.0, "chain.T_macro", "horizon must be positive");
    for (std::size_t i = 0; i < c.snapshot_times.size(); ++i)
        expect(c.snapshot_times[i] >= 0.0 && c.snapshot_times[i] <= c.t_macro + 1e-12,
               "chain.snapshot_times[" + std::to_string(i) + "]",
               "snapshot times must lie in [0, T_macro]");

    expect(c.ensemble_size >= 1, "ensemble.size", "ensemble size must be >= 1");
    if (c.antithetic)
        expect(c.ensemble_size % 2 == 0, "ensemble.size",
               "antithetic ensembles need an even member count");

    expect(c.initial_mode == "equilibrium" || c.initial_mode == "expressions" ||
               c.initial_mode == "csv",
           "initial.mode", "must be equilibrium, expressions or csv");
    if (c.initial_mode == "equilibrium")
        expect(c.initial_beta > 0.0, "initial.beta", "inverse temperature must be > 0");
    if (c.initial_mode == "expressions") {
        for (auto [field, text] : {std::pair<const char*, const std::string*>{
                                       "initial.r", &c.initial_r_expr},
                                   {"initial.p", &c.initial_p_expr},
                                   {"initial.E", &c.initial_e_expr}}) {
            expect(!text->empty(), field, "expression required in expressions mode");
            try {
                compile_expr(*text, "x");
            } catch (const ExprError& e) {
                throw ConfigError(field, e.what());
            }
        }
    }
    if (c.initial_mode == "csv")
        expect(!c.initial_csv.empty(), "initial.csv", "path required in csv mode");

    if (!c.tension_expr.empty()) {
        try {
            compile_expr(c.tension_expr, "t");
        } catch (const ExprError& e) {
            throw ConfigError("tension.expr", e.what());
        }
    }

    expect(!c.m_list.empty(), "pde.M", "need at least one grid size");
    for (std::size_t i = 0; i < c.m_list.size(); ++i)
        expect(c.m_list[i] >= 8, "pde.M[" + std::to_string(i) + "]",
               "grid needs at least 8 cells");
    expect(c.cfl > 0.0 && c.cfl <= 0.4 + 1e-12, "pde.cfl", "CFL must lie in (0, 0.4]");
    expect(c.eos_spacing > 0.0 && c.eos_spacing <= 0.1, "pde.eos_spacing",
           "table spacing must lie in (0, 0.1]");

    for (std::size_t i = 0; i < c.k_list.size(); ++i) {
        expect(c.k_list[i] >= 0, "blocks.k[" + std::to_string(i) + "]",
               "block half-width must be >= 0");
        expect(c.k_list[i] % 2 == 0, "blocks.k[" + std::to_string(i) + "]",
               "block half-width must be even (window of k+1 sites)");
        for (int n : c.n_list)
            expect(c.k_list[i] + 1 <= n, "blocks.k[" + std::to_string(i) + "]",
                   "block does not fit into the smallest chain");
    }
    expect(c.b_factor > 0.0, "blocks.b_factor", "cutoff factor must be positive");

    const auto known = default_test_functions();
    for (std::size_t i = 0; i < c.j_names.size(); ++i) {
        bool found = false;
        for (const auto& j : known) found = found || j.name == c.j_names[i];
        expect(found, "test_functions[" + std::to_string(i) + "]",
               "unknown test function \"" + c.j_names[i] + "\"");
    }

    for (std::size_t i = 0; i < c.thermo_beta.size(); ++i)
        expect(c.thermo_beta[i] > 0.0, "thermo.beta[" + std::to_string(i) + "]",
               "inverse temperature must be > 0");
    expect(c.workers >= 0, "workers", "worker count must be >= 0");
    expect(!c.out_dir.empty(), "output.dir", "output directory must be set");
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string s = serialize_config(cfg);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

Potential potential_from(const ExperimentConfig& cfg) {
    return make_potential(cfg.potential_kind, cfg.potential_param);
}

TensionSchedule schedule_from(const ExperimentConfig& cfg) {
    if (cfg.tension_expr.empty()) return TensionSchedule::constant(cfg.tension_constant);
    return TensionSchedule::from_function(compile_expr(cfg.tension_expr, "t"));
}

namespace {

struct CsvProfile {
    std::vector<double> x, r, p, E;

    double interp(const std::vector<double>& f, double xq) const {
        if (xq <= x.front()) return f.front();
        if (xq >= x.back()) return f.back();
        const auto it = std::upper_bound(x.begin(), x.end(), xq);
        const std::size_t hi = it - x.begin();
        const std::size_t lo = hi - 1;
        const double t = (xq - x[lo]) / (x[hi] - x[lo]);
        return f[lo] * (1.0 - t) + f[hi] * t;
    }
};

}  // namespace

MacroProfile profile_from(const ExperimentConfig& cfg, const Potential& pot) {
    if (cfg.initial_mode == "equilibrium") {
        const double beta = cfg.initial_beta;
        const Lambda lam{cfg.initial_tau * beta, cfg.initial_velocity * beta, beta};
        const MacroState u = grad_theta(lam, pot);
        return MacroProfile::constant(u);
    }
    if (cfg.initial_mode == "expressions") {
        return MacroProfile{compile_expr(cfg.initial_r_expr, "x"),
                            compile_expr(cfg.initial_p_expr, "x"),
                            compile_expr(cfg.initial_e_expr, "x")};
    }
    // csv with linear interpolation, columns x,r,p,E
    const CsvTable table = read_csv(cfg.initial_csv);
    const int cx = table.column("x"), cr = table.column("r"), cp = table.column("p"),
              ce = table.column("E");
    if (cx < 0 || cr < 0 || cp < 0 || ce < 0)
        throw ConfigError("initial.csv", "need columns x,r,p,E in " + cfg.initial_csv);
    auto prof = std::make_shared<CsvProfile>();
    for (const auto& row : table.rows) {
        prof->x.push_back(row[cx]);
        prof->r.push_back(row[cr]);
        prof->p.push_back(row[cp]);
        prof->E.push_back(row[ce]);
    }
    if (prof->x.size() < 2)
        throw ConfigError("initial.csv", "need at least two sample rows");
    return MacroProfile{
        [prof](double x) { return prof->interp(prof->r, x); },
        [prof](double x) { return prof->interp(prof->p, x); },
        [prof](double x) { return prof->interp(prof->E, x); }};
}

std::vector<TestFunction> test_functions_from(const ExperimentConfig& cfg) {
    std::vector<TestFunction> out;
    for (const auto& j : default_test_functions())
        for (const auto& name : cfg.j_names)
            if (j.name == name) out.push_back(j);
    return out;
}

LambdaProfile lambda_profile_from(const MacroProfile& prof, int n_sites,
                                  const Potential& pot) {
    LambdaProfile lp;
    lp.values.reserve(n_sites);
    std::map<std::tuple<double, double, double>, Lambda> cache;
    for (int i = 1; i <= n_sites; ++i) {
        const MacroState u = prof.at(double(i) / n_sites);
        const auto key = std::make_tuple(u.r_bar, u.p_bar, u.e_tot);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, invert_to_lambda(u, pot)).first;
        lp.values.push_back(it->second);
    }
    return lp;
}

}  // namespace chainflow
