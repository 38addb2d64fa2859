#include "chainflow/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "chainflow/config.hpp"
#include "chainflow/csv.hpp"
#include "chainflow/ensemble.hpp"
#include "chainflow/estimators.hpp"
#include "chainflow/expr.hpp"
#include "chainflow/kernels.hpp"

namespace chainflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// File-name tag for a snapshot time; path::stem() strips only the trailing
// .csv, so the decimal form round-trips through the file name.
std::string time_tag(double t) { return format_double(t); }

void write_state_csv(const fs::path& path, const std::vector<double>& r,
                     const std::vector<double>& p, const Potential& pot) {
    CsvTable t;
    t.header = {"i", "r", "p", "e"};
    std::vector<double> e(r.size());
    kernels::site_energy(pot, r.data(), p.data(), e.data(), r.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        t.rows.push_back({double(i + 1), r[i], p[i], e[i]});
    write_csv(path.string(), t);
}

json member_manifest(const EnsembleResult& res) {
    json members = json::array();
    for (std::size_t m = 0; m < res.status.size(); ++m) {
        const MemberStatus& st = res.status[m];
        json jm = {{"member", m},        {"ok", st.ok},
                   {"swaps", st.n_swaps}, {"res_r", st.res_r},
                   {"res_p", st.res_p},   {"res_e", st.res_e}};
        if (!st.ok) jm["error"] = st.error;
        members.push_back(jm);
    }
    return members;
}

int cmd_thermo(const ExperimentConfig& cfg) {
    const Potential pot = potential_from(cfg);
    fs::create_directories(cfg.out_dir);
    CsvTable t;
    t.header = {"lambda1", "lambda2", "lambda3", "r_bar",       "p_bar",
                "E",       "tension", "beta",    "sound_speed", "entropy"};
    for (double beta : cfg.thermo_beta)
        for (double pbar : cfg.thermo_pbar)
            for (double tau : cfg.thermo_tau) {
                const Lambda lam{tau * beta, pbar * beta, beta};
                const MacroState u = grad_theta(lam, pot);
                const double e = u.e_int();
                t.rows.push_back({lam.l1, lam.l2, lam.l3, u.r_bar, u.p_bar, u.e_tot,
                                  tension(u.r_bar, e, pot), beta,
                                  sound_speed(u.r_bar, e, pot),
                                  entropy(u.r_bar, e, pot)});
            }
    write_csv((fs::path(cfg.out_dir) / "thermo.csv").string(), t);
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "thermo.csv").string() << " ("
              << t.rows.size() << " rows)\n";
    return 0;
}

int cmd_sample(const ExperimentConfig& cfg) {
    const Potential pot = potential_from(cfg);
    const MacroProfile profile = profile_from(cfg, pot);
    for (int n : cfg.n_list) {
        const LambdaProfile lp = lambda_profile_from(profile, n, pot);
        const fs::path dir = fs::path(cfg.out_dir) / "sample" / ("N" + std::to_string(n));
        fs::create_directories(dir);
        for (int m = 0; m < cfg.ensemble_size; ++m) {
            if (cfg.antithetic && m % 2 == 0) {
                Rng rng(cfg.seed, 4ull * m + 1);
                auto pair = sample_chain_pair(lp, pot, rng);
                write_state_csv(dir / ("member" + std::to_string(m) + ".csv"),
                                pair.first.r, pair.first.p, pot);
                write_state_csv(dir / ("member" + std::to_string(m + 1) + ".csv"),
                                pair.second.r, pair.second.p, pot);
            } else if (!cfg.antithetic) {
                Rng rng(cfg.seed, 4ull * m + 1);
                const ChainState st = sample_chain(lp, pot, rng);
                write_state_csv(dir / ("member" + std::to_string(m) + ".csv"), st.r,
                                st.p, pot);
            }
        }
        std::cout << "sampled N=" << n << " x" << cfg.ensemble_size << " members\n";
    }
    return 0;
}

int cmd_simulate(const ExperimentConfig& cfg) {
    const Potential pot = potential_from(cfg);
    const TensionSchedule sched = schedule_from(cfg);
    const MacroProfile profile = profile_from(cfg, pot);
    bool any_failed = false;
    for (int n : cfg.n_list) {
        const EnsembleResult res = run_ensemble(cfg, n, pot, sched, profile);
        const fs::path dir = fs::path(cfg.out_dir) / "micro" / ("N" + std::to_string(n));
        for (std::size_t m = 0; m < res.logs.size(); ++m) {
            if (!res.status[m].ok) {
                any_failed = true;
                continue;
            }
            const fs::path mdir = dir / ("member" + std::to_string(m));
            fs::create_directories(mdir);
            for (const Snapshot& s : res.logs[m].snapshots)
                write_state_csv(mdir / ("t" + time_tag(s.t_macro) + ".csv"), s.r, s.p,
                                pot);
        }
        json manifest = {{"N", n},
                         {"config_hash", config_hash(cfg)},
                         {"seed", cfg.seed},
                         {"kernels", kernels::isa_name(kernels::active())},
                         {"members", member_manifest(res)}};
        fs::create_directories(dir);
        std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
        std::cout << "simulated N=" << n << " x" << cfg.ensemble_size << " members\n";
    }
    return any_failed ? 3 : 0;
}

void write_pde_snapshot(const fs::path& path, const PdeSnapshot& s) {
    CsvTable t;
    t.header = {"x",       "r_bar",   "p_bar",   "E",       "e_int",
                "tension", "entropy", "lambda1", "lambda2", "lambda3"};
    for (int j = 0; j < s.grid.m; ++j)
        t.rows.push_back({s.grid.x_center(j), s.grid.r[j], s.grid.p[j], s.grid.E[j],
                          s.e_int[j], s.tension[j], s.entropy[j], s.lambda1[j],
                          s.lambda2[j], s.lambda3[j]});
    write_csv(path.string(), t);
}

int cmd_solve(const ExperimentConfig& cfg) {
    const Potential pot = potential_from(cfg);
    const TensionSchedule sched = schedule_from(cfg);
    const MacroProfile profile = profile_from(cfg, pot);

    SolveOptions opts;
    opts.cfl = cfg.cfl;
    opts.snapshot_times = cfg.snapshot_times;
    opts.eos_spacing = cfg.eos_spacing;

    std::map<int, PdeRun> runs;
    for (int m : cfg.m_list) {
        PdeRun run = solve(profile, sched, m, cfg.t_macro, pot, opts);
        const fs::path dir = fs::path(cfg.out_dir) / "pde" / ("M" + std::to_string(m));
        fs::create_directories(dir);
        for (const PdeSnapshot& s : run.snapshots)
            write_pde_snapshot(dir / ("t" + time_tag(s.t) + ".csv"), s);
        json timeline = json::array();
        for (const auto& [t, st] : run.status_timeline)
            timeline.push_back({{"t", t}, {"status", int(st)}});
        json manifest = {{"M", m},
                         {"cfl", cfg.cfl},
                         {"steps", run.total_steps},
                         {"dt_min", run.dt_min},
                         {"dt_max", run.dt_max},
                         {"config_hash", config_hash(cfg)},
                         {"max_entropy_drift", run.max_entropy_drift},
                         {"status_timeline", timeline},
                         {"corner_residuals",
                          {{"c1_left", run.corners.c1_left},
                           {"c1_right", run.corners.c1_right},
                           {"c2_left", run.corners.c2_left},
                           {"c2_right", run.corners.c2_right},
                           {"c3_left", run.corners.c3_left},
                           {"c3_right", run.corners.c3_right}}}};
        std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
        std::cout << "solved M=" << m << " (" << run.total_steps << " steps)\n";
        runs.emplace(m, std::move(run));
    }

    // Richardson self-convergence between consecutive grids.
    if (cfg.m_list.size() >= 2) {
        std::vector<int> ms = cfg.m_list;
        std::sort(ms.begin(), ms.end());
        CsvTable conv;
        conv.header = {"M_coarse", "M_fine", "field", "diff_l2"};
        auto restrict_diff = [&](const PdeRun& coarse, const PdeRun& fine,
                                 auto field_of) {
            const auto& gc = coarse.snapshots.back();
            const auto& gf = fine.snapshots.back();
            const int mc = gc.grid.m;
            const int ratio = gf.grid.m / mc;
            double acc = 0.0;
            for (int j = 0; j < mc; ++j) {
                double avg = 0.0;
                for (int q = 0; q < ratio; ++q) avg += field_of(gf)[j * ratio + q];
                avg /= ratio;
                const double d = avg - field_of(gc)[j];
                acc += d * d;
            }
            return std::sqrt(acc / mc);
        };
        for (std::size_t i = 0; i + 1 < ms.size(); ++i) {
            const PdeRun& coarse = runs.at(ms[i]);
            const PdeRun& fine = runs.at(ms[i + 1]);
            if (fine.snapshots.back().grid.m % coarse.snapshots.back().grid.m != 0)
                continue;
            conv.rows.push_back({double(ms[i]), double(ms[i + 1]), 1.0,
                                 restrict_diff(coarse, fine, [](const PdeSnapshot& s)
                                                   -> const std::vector<double>& {
                                     return s.grid.r;
                                 })});
            conv.rows.push_back({double(ms[i]), double(ms[i + 1]), 2.0,
                                 restrict_diff(coarse, fine, [](const PdeSnapshot& s)
                                                   -> const std::vector<double>& {
                                     return s.grid.p;
                                 })});
            conv.rows.push_back({double(ms[i]), double(ms[i + 1]), 3.0,
                                 restrict_diff(coarse, fine, [](const PdeSnapshot& s)
                                                   -> const std::vector<double>& {
                                     return s.grid.E;
                                 })});
        }
        write_csv((fs::path(cfg.out_dir) / "pde" / "convergence.csv").string(), conv);
    }
    return 0;
}

// ---- compare: reads back the micro and pde output trees ----

struct MicroEnsemble {
    std::vector<ObservationLog> logs;
};

MicroEnsemble read_micro(const fs::path& dir, int members) {
    MicroEnsemble ens;
    for (int m = 0; m < members; ++m) {
        const fs::path mdir = dir / ("member" + std::to_string(m));
        if (!fs::exists(mdir)) continue;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(mdir)) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        ObservationLog log;
        for (const auto& f : files) {
            const CsvTable t = read_csv(f.string());
            Snapshot s;
            // time from the file name tag
            s.t_macro = parse_double(f.stem().string().substr(1));
            const int cr = t.column("r"), cp = t.column("p");
            for (const auto& row : t.rows) {
                s.r.push_back(row[cr]);
                s.p.push_back(row[cp]);
            }
            log.snapshots.push_back(std::move(s));
        }
        std::sort(log.snapshots.begin(), log.snapshots.end(),
                  [](const Snapshot& a, const Snapshot& b) { return a.t_macro < b.t_macro; });
        ens.logs.push_back(std::move(log));
    }
    return ens;
}

PdeRun read_pde(const fs::path& dir) {
    PdeRun run;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const CsvTable t = read_csv(f.string());
        PdeSnapshot s;
        s.t = parse_double(f.stem().string().substr(1));
        const int cr = t.column("r_bar"), cp = t.column("p_bar"), ce = t.column("E");
        const int cl1 = t.column("lambda1"), cl2 = t.column("lambda2"),
                  cl3 = t.column("lambda3"), cei = t.column("e_int");
        for (const auto& row : t.rows) {
            s.grid.r.push_back(row[cr]);
            s.grid.p.push_back(row[cp]);
            s.grid.E.push_back(row[ce]);
            s.e_int.push_back(row[cei]);
            s.lambda1.push_back(row[cl1]);
            s.lambda2.push_back(row[cl2]);
            s.lambda3.push_back(row[cl3]);
        }
        s.grid.m = int(s.grid.r.size());
        s.grid.t = s.t;
        run.snapshots.push_back(std::move(s));
    }
    std::sort(run.snapshots.begin(), run.snapshots.end(),
              [](const PdeSnapshot& a, const PdeSnapshot& b) { return a.t < b.t; });
    return run;
}

int cmd_compare(const ExperimentConfig& cfg, bool assert_mode) {
    const Potential pot = potential_from(cfg);
    const TensionSchedule sched = schedule_from(cfg);
    const auto j_set = test_functions_from(cfg);
    const fs::path out(cfg.out_dir);

    const int m_fine = *std::max_element(cfg.m_list.begin(), cfg.m_list.end());
    const fs::path pde_dir = out / "pde" / ("M" + std::to_string(m_fine));
    if (!fs::exists(pde_dir))
        throw ConfigError("pde", "no solver output under " + pde_dir.string() +
                                     "; run `solve` first");
    const PdeRun pde_run = read_pde(pde_dir);

    CsvTable field_report;
    field_report.header = {"t", "alpha", "J", "N", "weak_error", "std_err"};
    std::map<std::string, int> j_index;
    for (std::size_t i = 0; i < j_set.size(); ++i) j_index[j_set[i].name] = int(i);

    CsvTable block_report;
    block_report.header = {"k", "b", "N", "t", "mean_residual", "std_err"};

    CsvTable localeq_report;
    localeq_report.header = {"N", "t", "site", "k", "moment", "z", "observed",
                             "predicted", "std_err"};

    // weak errors per (N, t, alpha, J) keyed for the monotonicity verdict
    std::map<std::tuple<double, int, std::string>, std::vector<std::pair<int, double>>>
        by_field;

    for (int n : cfg.n_list) {
        const fs::path micro_dir = out / "micro" / ("N" + std::to_string(n));
        if (!fs::exists(micro_dir))
            throw ConfigError("chain", "no micro output under " + micro_dir.string() +
                                           "; run `simulate` first");
        const MicroEnsemble ens = read_micro(micro_dir, cfg.ensemble_size);
        if (ens.logs.empty())
            throw ConfigError("chain", "no members found under " + micro_dir.string());

        const auto errors = field_error(ens.logs, pde_run, pot, j_set, cfg.antithetic);
        for (const FieldError& fe : errors) {
            field_report.rows.push_back({fe.t, double(fe.alpha), double(j_index[fe.j_name]),
                                         double(n), fe.weak_error, fe.std_err});
            by_field[{fe.t, fe.alpha, fe.j_name}].push_back({n, fe.weak_error});
        }

        // one-block residuals and local-equilibrium moments on the final
        // snapshot plus the equilibrium (t=0) one
        for (std::size_t snap : {std::size_t(0), ens.logs.front().snapshots.size() - 1}) {
            const double t = ens.logs.front().snapshots[snap].t_macro;
            // mean site energy fixes the cutoff
            double mean_e = 0.0;
            {
                const auto& s0 = ens.logs.front().snapshots[snap];
                std::vector<double> e(s0.r.size());
                kernels::site_energy(pot, s0.r.data(), s0.p.data(), e.data(), e.size());
                for (double v : e) mean_e += v;
                mean_e /= double(e.size());
            }
            const double b_cut = cfg.b_factor * mean_e;

            for (int k : cfg.k_list) {
                if (k + 1 > n) continue;
                std::vector<double> per_member;
                for (const auto& log : ens.logs) {
                    ChainState st;
                    st.r = log.snapshots[snap].r;
                    st.p = log.snapshots[snap].p;
                    double acc = 0.0;
                    int cnt = 0;
                    const int stride = std::max(1, k / 2);
                    for (int site = k / 2 + 1; site <= n - k / 2; site += stride) {
                        const auto res = one_block_residual(st, pot, site,
                                                            BlockSpec{k, b_cut}, sched, t);
                        if (res.valid) {
                            acc += res.residual;
                            ++cnt;
                        }
                    }
                    if (cnt > 0) per_member.push_back(acc / cnt);
                }
                double mean = 0.0, se = 0.0;
                for (double v : per_member) mean += v;
                mean /= std::max<std::size_t>(1, per_member.size());
                if (per_member.size() > 1) {
                    double ss = 0.0;
                    for (double v : per_member) ss += (v - mean) * (v - mean);
                    se = std::sqrt(ss / (double(per_member.size()) *
                                         double(per_member.size() - 1)));
                }
                block_report.rows.push_back(
                    {double(k), b_cut, double(n), t, mean, se});
            }

            // local equilibrium against the solver's lambda export
            int pde_idx = -1;
            for (std::size_t q = 0; q < pde_run.snapshots.size(); ++q)
                if (std::fabs(pde_run.snapshots[q].t - t) < 1e-12) pde_idx = int(q);
            if (pde_idx >= 0) {
                const PdeSnapshot& ps = pde_run.snapshots[pde_idx];
                const int k = cfg.k_list.empty() ? 32 : cfg.k_list.front();
                std::vector<const ChainState*> states;
                std::vector<ChainState> storage;
                storage.reserve(ens.logs.size());
                for (const auto& log : ens.logs) {
                    ChainState st;
                    st.r = log.snapshots[snap].r;
                    st.p = log.snapshots[snap].p;
                    storage.push_back(std::move(st));
                }
                for (const auto& st : storage) states.push_back(&st);
                const int n_blocks = 8;
                for (int bi = 0; bi < n_blocks; ++bi) {
                    const int site =
                        k / 2 + 1 + int((double(n - k - 2) * bi) / (n_blocks - 1));
                    const double x = double(site) / n;
                    const Lambda lam_ref{
                        sample_field(ps.grid, ps.lambda1, x),
                        sample_field(ps.grid, ps.lambda2, x),
                        sample_field(ps.grid, ps.lambda3, x)};
                    const auto mr = local_equilibrium_moments(states, pot, site, k,
                                                              lam_ref, cfg.antithetic);
                    for (int q = 0; q < 5; ++q)
                        localeq_report.rows.push_back(
                            {double(n), t, double(site), double(k), double(q), mr.z[q],
                             mr.observed[q], mr.predicted[q], mr.std_err[q]});
                }
            }
        }
    }

    fs::create_directories(out / "reports");
    write_csv((out / "reports" / "field_error.csv").string(), field_report);
    write_csv((out / "reports" / "one_block.csv").string(), block_report);
    write_csv((out / "reports" / "local_equilibrium.csv").string(), localeq_report);

    // Monotonicity verdict across the N list.
    CsvTable verdicts;
    verdicts.header = {"t", "alpha", "J", "monotone"};
    bool all_monotone = true;
    for (auto& [key, series] : by_field) {
        auto s = series;
        std::sort(s.begin(), s.end());
        bool mono = true;
        for (std::size_t i = 0; i + 1 < s.size(); ++i)
            mono = mono && s[i + 1].second <= s[i].second;
        if (s.size() >= 2 && std::get<0>(key) > 0.0) all_monotone = all_monotone && mono;
        verdicts.rows.push_back({std::get<0>(key), double(std::get<1>(key)),
                                 double(j_index[std::get<2>(key)]), mono ? 1.0 : 0.0});
    }
    write_csv((out / "reports" / "convergence_verdict.csv").string(), verdicts);

    std::cout << "wrote comparison reports under "
              << (out / "reports").string() << "\n";
    if (assert_mode && !all_monotone) {
        std::cerr << "compare --assert: weak errors are not monotone in N\n";
        return 4;
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"chain-of-oscillators hydrodynamics laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_override, kernels_choice = "auto";
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    int workers_override = -1;
    bool assert_mode = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment configuration (JSON)")
            ->required();
        sub->add_option("--out", out_override, "output directory override");
        sub->add_option("--seed", seed_override, "root seed override")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--workers", workers_override, "worker thread count");
        sub->add_option("--kernels", kernels_choice,
                        "kernel ISA: auto, scalar or avx2");
    };

    CLI::App* c_thermo = app.add_subcommand("thermo", "tabulate the equation of state");
    CLI::App* c_sample = app.add_subcommand("sample", "draw initial ensembles");
    CLI::App* c_sim = app.add_subcommand("simulate", "run microscopic ensembles");
    CLI::App* c_solve = app.add_subcommand("solve", "run the macroscopic solver");
    CLI::App* c_cmp = app.add_subcommand("compare", "micro vs macro comparison reports");
    for (CLI::App* sub : {c_thermo, c_sample, c_sim, c_solve, c_cmp}) add_common(sub);
    c_cmp->add_flag("--assert", assert_mode, "exit 4 unless weak errors shrink with N");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help();
            return 0;
        }
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        ExperimentConfig cfg = load_config(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (seed_set) cfg.seed = seed_override;
        if (workers_override >= 0) cfg.workers = workers_override;
        validate_config(cfg);
        if (!kernels::set_active(kernels_choice)) {
            std::cerr << "kernels: \"" << kernels_choice
                      << "\" not available on this host\n";
            return 2;
        }

        if (app.got_subcommand(c_thermo)) return cmd_thermo(cfg);
        if (app.got_subcommand(c_sample)) return cmd_sample(cfg);
        if (app.got_subcommand(c_sim)) return cmd_simulate(cfg);
        if (app.got_subcommand(c_solve)) return cmd_solve(cfg);
        if (app.got_subcommand(c_cmp)) return cmd_compare(cfg, assert_mode);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ExprError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TimeMisalignment& e) {
        std::cerr << "comparison error: " << e.what() << "\n";
        return 2;
    } catch (const PdeError& e) {
        std::cerr << "numerical failure: " << e.what();
        if (e.code == PdeErrc::shock_before_horizon)
            std::cerr << " (t = " << e.detail << ")";
        std::cerr << "\n";
        return 3;
    } catch (const NonFinite& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const ThermoError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const EnvelopeFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

}  // namespace chainflow
