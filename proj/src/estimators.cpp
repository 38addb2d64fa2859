#include "chainflow/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "chainflow/kernels.hpp"

namespace chainflow {

std::vector<TestFunction> default_test_functions() {
    std::vector<TestFunction> js;
    js.push_back({"one", [](double) { return 1.0; }, false});
    js.push_back({"sine", [](double x) { return std::sin(M_PI * x); }, false});
    js.push_back({"parab", [](double x) { return x * (1.0 - x); }, false});
    js.push_back({"bump",
                  [](double x) {
                      if (x <= 0.0 || x >= 1.0) return 0.0;
                      return std::exp(4.0 - 1.0 / (x * (1.0 - x)));
                  },
                  true});
    return js;
}

double empirical_density(const ChainState& state, const Potential& pot,
                         const TestFunction& j, int alpha) {
    const std::size_t n = state.size();
    const double inv_n = 1.0 / double(n);
    double acc = 0.0;
    if (alpha == 1) {
        for (std::size_t i = 0; i < n; ++i)
            acc += j.eval(double(i + 1) * inv_n) * state.r[i];
    } else if (alpha == 2) {
        for (std::size_t i = 0; i < n; ++i)
            acc += j.eval(double(i + 1) * inv_n) * state.p[i];
    } else if (alpha == 3) {
        std::vector<double> e(n);
        kernels::site_energy(pot, state.r.data(), state.p.data(), e.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            acc -= j.eval(double(i + 1) * inv_n) * e[i];
    } else {
        throw std::invalid_argument("empirical_density: alpha must be 1, 2 or 3");
    }
    return acc * inv_n;
}

namespace {

void check_block(std::size_t n, int site, int k) {
    if (k < 0 || (k % 2) != 0)
        throw BlockOutOfRange("block half-width k must be even and non-negative");
    if (!(site > k / 2 && site <= int(n) - k / 2))
        throw BlockOutOfRange("block does not fit: need k/2 < i <= N - k/2");
}

}  // namespace

Vec3 block_average(const ChainState& state, const Potential& pot, int site, int k) {
    check_block(state.size(), site, k);
    const int lo = site - k / 2, hi = site + k / 2;
    Vec3 acc{0.0, 0.0, 0.0};
    for (int l = lo; l <= hi; ++l) {
        const double r = state.r[l - 1];
        const double p = state.p[l - 1];
        acc[0] += r;
        acc[1] += p;
        acc[2] -= 0.5 * p * p + pot.eval(r);
    }
    const double w = 1.0 / double(k + 1);
    return Vec3{acc[0] * w, acc[1] * w, acc[2] * w};
}

Vec3 micro_flux(const ChainState& state, const Potential& pot, int bond,
                const TensionSchedule& sched, double t_macro) {
    const int n = int(state.size());
    if (bond < 1 || bond > n + 1)
        throw std::out_of_range("micro_flux: bond index outside 1..N+1");
    if (bond == n + 1) {
        const double tau = sched.tau(t_macro);
        const double pn = state.p[n - 1];
        return Vec3{-pn, -tau, pn * tau};
    }
    const double p_left = bond >= 2 ? state.p[bond - 2] : 0.0;  // wall: p_0 = 0
    const double dv = pot.deriv(state.r[bond - 1]);
    return Vec3{-p_left, -dv, p_left * dv};
}

std::optional<Vec3> block_flux_prediction(const Vec3& zeta_block, const Potential& pot) {
    const MacroState u{zeta_block[0], zeta_block[1], -zeta_block[2]};
    const double e = u.e_int();
    const double floor = pot.eval(u.r_bar);
    double pt;
    const double cold_tol = 1e-7 * (1.0 + std::fabs(e));
    if (e < floor - cold_tol) return std::nullopt;  // below the energy floor
    if (e - floor < cold_tol) {
        // Zero-temperature limit of the Gibbs measure: the site distribution
        // degenerates and P -> V'(r).
        pt = pot.deriv(u.r_bar);
    } else {
        try {
            pt = tension(u.r_bar, e, pot);
        } catch (const ThermoError&) {
            return std::nullopt;
        }
    }
    return Vec3{-u.p_bar, -pt, u.p_bar * pt};
}

OneBlockResult one_block_residual(const ChainState& state, const Potential& pot,
                                  int site, const BlockSpec& spec,
                                  const TensionSchedule& sched, double t_macro) {
    const int n = int(state.size());
    const int k = spec.k;
    check_block(state.size(), site, k);
    std::vector<double> e(state.size());
    kernels::site_energy(pot, state.r.data(), state.p.data(), e.data(), state.size());

    const int lo = site - k / 2, hi = site + k / 2;
    Vec3 flux_acc{0.0, 0.0, 0.0};
    Vec3 zeta_acc{0.0, 0.0, 0.0};
    for (int l = lo; l <= hi; ++l) {
        if (std::fabs(e[l - 1]) > spec.b) continue;  // cutoff indicator
        const Vec3 jf = micro_flux(state, pot, l, sched, t_macro);
        flux_acc[0] += jf[0];
        flux_acc[1] += jf[1];
        flux_acc[2] += jf[2];
        zeta_acc[0] += state.r[l - 1];
        zeta_acc[1] += state.p[l - 1];
        zeta_acc[2] -= e[l - 1];
    }
    (void)n;
    const double w = 1.0 / double(k + 1);
    OneBlockResult out;
    out.flux_avg = Vec3{flux_acc[0] * w, flux_acc[1] * w, flux_acc[2] * w};
    const Vec3 zk{zeta_acc[0] * w, zeta_acc[1] * w, zeta_acc[2] * w};

    const auto predicted = block_flux_prediction(zk, pot);
    if (!predicted) {
        out.valid = false;
        return out;
    }
    out.flux_predicted = *predicted;
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double d = out.flux_avg[c] - out.flux_predicted[c];
        s += d * d;
    }
    out.residual = std::sqrt(s);
    return out;
}

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

// Mean and standard error over independent units; with pair_units the
// consecutive members form antithetic pairs and the pair means are the
// units.
MeanSe mean_se(const std::vector<double>& per_member, bool pair_units) {
    std::vector<double> units;
    if (pair_units && per_member.size() % 2 == 0) {
        for (std::size_t i = 0; i + 1 < per_member.size(); i += 2)
            units.push_back(0.5 * (per_member[i] + per_member[i + 1]));
    } else {
        units = per_member;
    }
    const std::size_t n = units.size();
    MeanSe out;
    for (double v : units) out.mean += v;
    out.mean /= double(n);
    if (n > 1) {
        double ss = 0.0;
        for (double v : units) ss += (v - out.mean) * (v - out.mean);
        out.se = std::sqrt(ss / (double(n) * double(n - 1)));
    }
    return out;
}

}  // namespace

MomentResiduals local_equilibrium_moments(const std::vector<const ChainState*>& ensemble,
                                          const Potential& pot, int site, int k,
                                          const Lambda& lam_ref, bool pair_units) {
    if (ensemble.size() < 2)
        throw std::invalid_argument("local_equilibrium_moments needs an ensemble");
    check_block(ensemble.front()->size(), site, k);

    const int lo = site - k / 2, hi = site + k / 2;
    const int kk = k + 1;
    std::array<std::vector<double>, 5> per_member;
    for (auto& v : per_member) v.reserve(ensemble.size());
    for (const ChainState* st : ensemble) {
        double sr = 0.0, sp = 0.0, spp = 0.0, sdv = 0.0, se = 0.0;
        for (int l = lo; l <= hi; ++l) {
            const double r = st->r[l - 1], p = st->p[l - 1];
            sr += r;
            sp += p;
            spp += p * p;
            sdv += pot.deriv(r);
            se += 0.5 * p * p + pot.eval(r);
        }
        const double mp = sp / kk;
        per_member[0].push_back(sr / kk);
        per_member[1].push_back(mp);
        // unbiased block sample variance of p
        per_member[2].push_back((spp - kk * mp * mp) / (kk - 1));
        per_member[3].push_back(sdv / kk);
        per_member[4].push_back(se / kk);
    }

    const SiteMoments m = site_moments(lam_ref, pot);
    MomentResiduals out;
    out.predicted = {m.mean_r, m.mean_p, m.var_p, m.mean_dV, m.mean_e};
    for (int q = 0; q < 5; ++q) {
        const MeanSe ms = mean_se(per_member[q], pair_units);
        out.observed[q] = ms.mean;
        out.std_err[q] = ms.se;
        out.z[q] = ms.se > 0.0 ? (ms.mean - out.predicted[q]) / ms.se : 0.0;
    }
    return out;
}

std::vector<FieldError> field_error(const std::vector<ObservationLog>& ensemble,
                                    const PdeRun& pde_run, const Potential& pot,
                                    const std::vector<TestFunction>& j_set,
                                    bool pair_units) {
    if (ensemble.empty()) throw std::invalid_argument("field_error: empty ensemble");
    const std::size_t n_snaps = ensemble.front().snapshots.size();
    for (const auto& log : ensemble)
        if (log.snapshots.size() != n_snaps)
            throw TimeMisalignment("ensemble members disagree on snapshot count");

    // Align the micro snapshot times with the PDE snapshots.
    std::vector<int> pde_index(n_snaps, -1);
    for (std::size_t s = 0; s < n_snaps; ++s) {
        const double t = ensemble.front().snapshots[s].t_macro;
        for (std::size_t q = 0; q < pde_run.snapshots.size(); ++q)
            if (std::fabs(pde_run.snapshots[q].t - t) < 1e-12) pde_index[s] = int(q);
        if (pde_index[s] < 0) {
            std::string micro_times, pde_times;
            for (std::size_t u = 0; u < n_snaps; ++u)
                micro_times +=
                    std::to_string(ensemble.front().snapshots[u].t_macro) + " ";
            for (const auto& q : pde_run.snapshots)
                pde_times += std::to_string(q.t) + " ";
            throw TimeMisalignment("no matching solver snapshot; micro times: [" +
                                   micro_times + "], solver times: [" + pde_times + "]");
        }
    }

    const std::size_t n = ensemble.front().snapshots.front().r.size();
    std::vector<FieldError> report;
    for (std::size_t s = 0; s < n_snaps; ++s) {
        const PdeSnapshot& ps = pde_run.snapshots[pde_index[s]];
        for (int alpha = 1; alpha <= 3; ++alpha) {
            for (const TestFunction& j : j_set) {
                // Reference: the same lattice quadrature applied to the
                // PDE profile interpolated at the lattice points.
                double ref = 0.0;
                for (std::size_t i = 1; i <= n; ++i) {
                    const double x = double(i) / double(n);
                    double val;
                    if (alpha == 1)
                        val = sample_field(ps.grid, ps.grid.r, x);
                    else if (alpha == 2)
                        val = sample_field(ps.grid, ps.grid.p, x);
                    else
                        val = -sample_field(ps.grid, ps.grid.E, x);
                    ref += j.eval(x) * val;
                }
                ref /= double(n);

                std::vector<double> per_member;
                per_member.reserve(ensemble.size());
                for (const auto& log : ensemble) {
                    ChainState st;
                    st.r = log.snapshots[s].r;
                    st.p = log.snapshots[s].p;
                    per_member.push_back(empirical_density(st, pot, j, alpha));
                }
                const MeanSe ms = mean_se(per_member, pair_units);
                FieldError fe;
                fe.t = ensemble.front().snapshots[s].t_macro;
                fe.alpha = alpha;
                fe.j_name = j.name;
                fe.weak_error = std::fabs(ms.mean - ref);
                fe.std_err = ms.se;
                fe.reference = ref;
                fe.boundary_sensitive = !j.compact_support;
                report.push_back(std::move(fe));
            }
        }
    }
    return report;
}

}  // namespace chainflow
