#include "nwcav/sweep/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace nwcav::sweep {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void run_pool(int workers, int n, const std::function<void(int)>& job) {
    const int k = std::max(1, std::min(workers, n));
    if (k == 1) {
        for (int i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t)
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < n;) job(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace

// Vacuum normalization run: same pulse, numerics, and dipole position as the
// base design, absorbing boundaries on every side.
fdtd::RunResult vacuum_reference(const scene::SceneSpec& base, const fdtd::Numerics& numerics,
                                 const std::vector<double>& wavelengths) {
    const auto p = base.dipole_position_nm();
    const double res = numerics.resolution_nm;
    const double half = 120.0 + (numerics.absorber_layers + 6) * res;
    auto grid = fdtd::air_grid({p[0] - half, p[1] - half, p[2] - half},
                               {p[0] + half, p[1] + half, p[2] + half}, res);
    fdtd::Numerics num = numerics;
    for (auto& side : num.boundary)
        for (auto& b : side) b = fdtd::Boundary::Cpml;
    const auto pulse =
        fdtd::Pulse::for_band(base.center_wavelength_nm, base.band_halfwidth_nm);
    auto sources = fdtd::make_dipole_sources(grid.layout, p, base.dipole_orientation, pulse);
    std::vector<fdtd::MonitorSpec> mons{fdtd::total_power_monitor(p, 120.0, wavelengths)};
    auto ref = fdtd::run_on_grid(grid, std::move(sources), num, mons);
    if (ref.under_resolved)
        throw std::runtime_error("vacuum reference run did not converge; raise max_steps");
    return ref;
}

namespace {

Runner make_fdtd_runner(const scene::SceneSpec& base, const fdtd::Numerics& numerics,
                        const std::vector<double>& wavelengths, const SweepOptions& options) {
    if (base.mirror_enabled && !options.mirror_material)
        throw std::invalid_argument(
            "mirror-enabled sweep needs a fitted mirror material in SweepOptions");
    auto ref = std::make_shared<fdtd::RunResult>(vacuum_reference(base, numerics, wavelengths));
    const auto mirror = options.mirror_material;
    const double padding = options.domain_padding_nm;
    return [ref, mirror, padding](const scene::SceneSpec& spec, const fdtd::Numerics& num,
                                  const std::vector<double>& w) {
        std::vector<fdtd::MonitorSpec> mons{
            fdtd::total_power_monitor(spec.dipole_position_nm(), 120.0, w)};
        const auto res = fdtd::run(spec, num, std::move(mons), mirror, padding);
        const auto ps = emission::purcell_spectrum(res, *ref);
        return RowResult{ps.f_p, !res.under_resolved};
    };
}

// Shared sweep skeleton: one scene variant per parameter, bounded pool,
// per-row failure isolation, deterministic slot assembly.
PurcellMap run_sweep(const scene::SceneSpec& base, std::string parameter_name,
                     const std::vector<double>& parameter, const fdtd::Numerics& numerics,
                     const SweepOptions& options,
                     const std::function<void(scene::SceneSpec&, double)>& apply,
                     const std::function<std::string(const scene::SceneSpec&, double)>& precheck) {
    if (parameter.empty()) throw std::invalid_argument("empty parameter list");
    numerics.validate();

    PurcellMap map;
    map.parameter_name = std::move(parameter_name);
    map.parameter = parameter;
    map.wavelength_nm = fdtd::default_band(base.center_wavelength_nm, base.band_halfwidth_nm,
                                           options.wavelength_step_nm);
    const std::size_t m = map.wavelength_nm.size();
    map.f_p.assign(parameter.size() * m, kNan);
    map.rows.assign(parameter.size(), RowStatus{});

    Runner runner = options.runner
                        ? options.runner
                        : make_fdtd_runner(base, numerics, map.wavelength_nm, options);

    run_pool(options.workers, static_cast<int>(parameter.size()), [&](int i) {
        auto& status = map.rows[static_cast<std::size_t>(i)];
        try {
            scene::SceneSpec spec = base;
            apply(spec, parameter[static_cast<std::size_t>(i)]);
            if (precheck) {
                const std::string why = precheck(spec, parameter[static_cast<std::size_t>(i)]);
                if (!why.empty()) throw std::invalid_argument(why);
            }
            RowResult row = runner(spec, numerics, map.wavelength_nm);
            if (row.f_p.size() != m)
                throw std::runtime_error("runner returned a spectrum of the wrong length");
            std::copy(row.f_p.begin(), row.f_p.end(),
                      map.f_p.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * m));
            status.converged = row.converged;
        } catch (const std::exception& e) {
            status.failed = true;
            status.converged = false;
            status.message = e.what();
        }
    });
    return map;
}

}  // namespace

PurcellMap sweep_height(const scene::SceneSpec& base, const std::vector<double>& heights_nm,
                        const fdtd::Numerics& numerics, const SweepOptions& options) {
    return run_sweep(
        base, "height_nm", heights_nm, numerics, options,
        [](scene::SceneSpec& s, double h) { s.height_nm = h; }, nullptr);
}

PurcellMap tolerance_sweep(const scene::SceneSpec& base, ToleranceAxis axis,
                           const std::vector<double>& values_nm, const fdtd::Numerics& numerics,
                           const SweepOptions& options) {
    if (axis == ToleranceAxis::CrownHeight)
        return run_sweep(
            base, "crown_height_nm", values_nm, numerics, options,
            [](scene::SceneSpec& s, double v) { s.crown_height_nm = v; },
            [](const scene::SceneSpec& s, double v) {
                return v >= s.height_nm ? "crown taller than the wire" : "";
            });
    return run_sweep(
        base, "lateral_offset_nm", values_nm, numerics, options,
        [](scene::SceneSpec& s, double v) { s.dipole_lateral_offset_nm = v; },
        [](const scene::SceneSpec& s, double v) {
            return std::abs(v) >= 0.5 * s.diameter_nm ? "dipole leaves the wire cross-section"
                                                      : "";
        });
}

ScalingFit fit_scaling_law(const std::vector<std::pair<double, double>>& samples) {
    if (samples.size() < 2)
        throw std::runtime_error("not enough scaling samples for a fit");
    ScalingFit fit;
    double sx = 0.0, sy = 0.0;
    for (const auto& [s, lam] : samples) {
        sx += s;
        sy += lam;
    }
    sx /= static_cast<double>(samples.size());
    sy /= static_cast<double>(samples.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [s, lam] : samples) {
        sxx += (s - sx) * (s - sx);
        sxy += (s - sx) * (lam - sy);
    }
    if (sxx <= 0.0) throw std::invalid_argument("scaling samples share one scale factor");
    fit.slope_nm = sxy / sxx;
    fit.intercept_nm = sy - fit.slope_nm * sx;
    double rss = 0.0;
    for (const auto& [s, lam] : samples) {
        fit.scale.push_back(s);
        fit.peak_nm.push_back(lam);
        const double r = lam - (fit.slope_nm * s + fit.intercept_nm);
        rss += r * r;
    }
    fit.residual_rms_nm = std::sqrt(rss / static_cast<double>(samples.size()));
    return fit;
}

ScaleSweepResult sweep_scale(const scene::SceneSpec& base, const std::vector<double>& factors,
                             const fdtd::Numerics& numerics, const SweepOptions& options) {
    ScaleSweepResult out;
    out.map = run_sweep(
        base, "scale_factor", factors, numerics, options,
        [](scene::SceneSpec& s, double f) {
            // Wire geometry scales uniformly; the emitter depth below the top
            // facet and the oxide layer are growth constants and stay put.
            s.diameter_nm *= f;
            s.height_nm *= f;
            s.crown_height_nm *= f;
        },
        [](const scene::SceneSpec&, double f) {
            return f <= 0.0 ? "scale factor must be positive" : "";
        });

    std::vector<std::pair<double, double>> samples;
    std::vector<double> excluded;
    const std::size_t m = out.map.wavelength_nm.size();
    for (std::size_t r = 0; r < out.map.parameter.size(); ++r) {
        if (out.map.rows[r].failed) {
            excluded.push_back(out.map.parameter[r]);
            continue;
        }
        std::vector<double> row(out.map.f_p.begin() + static_cast<std::ptrdiff_t>(r * m),
                                out.map.f_p.begin() + static_cast<std::ptrdiff_t>((r + 1) * m));
        try {
            const auto peak = emission::find_peak_fwhm(out.map.wavelength_nm, row);
            samples.emplace_back(out.map.parameter[r], peak.wavelength_nm);
        } catch (const std::exception&) {  // peak ran off the band edge
            excluded.push_back(out.map.parameter[r]);
        }
    }
    out.fit = fit_scaling_law(samples);
    out.fit.excluded_scale = std::move(excluded);
    return out;
}

namespace {

struct Track {
    std::map<std::size_t, std::pair<double, double>> points;  // sorted row -> (lam, F)
    std::size_t last_row = 0;
    double last_lam = 0.0;
};

struct RowPeaks {
    std::size_t row;  // index into the sorted row order
    std::vector<std::pair<double, double>> peaks;  // (lam, F)
};

}  // namespace

AnticrossingReport detect_avoided_crossing(const PurcellMap& map, const DetectOptions& options) {
    const std::size_t n = map.parameter.size();
    const std::size_t m = map.wavelength_nm.size();
    if (n < 2 || m < 3) throw std::invalid_argument("map too small for ridge detection");

    // Consumers see rows in parameter order regardless of sweep order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return map.parameter[a] < map.parameter[b]; });

    std::vector<RowPeaks> rows;
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t r = order[pos];
        if (map.rows[r].failed) continue;
        const double* v = map.f_p.data() + r * m;
        std::vector<double> sorted(v, v + m);
        std::sort(sorted.begin(), sorted.end());
        const double median = sorted[m / 2];
        const double floor = options.prominence_factor * median;
        RowPeaks rp;
        rp.row = pos;
        for (std::size_t c = 1; c + 1 < m; ++c)
            if (v[c] > v[c - 1] && v[c] >= v[c + 1] && v[c] > floor)
                rp.peaks.emplace_back(map.wavelength_nm[c], v[c]);
        if (!rp.peaks.empty()) rows.push_back(std::move(rp));
    }

    // Nearest-neighbor linking, one extension per track per row, gaps of one
    // row tolerated (merged or missed peaks).
    std::vector<Track> tracks;
    for (const auto& rp : rows) {
        struct Cand {
            double dist;
            std::size_t track, peak;
        };
        std::vector<Cand> cands;
        for (std::size_t t = 0; t < tracks.size(); ++t) {
            if (rp.row - tracks[t].last_row > 2) continue;
            for (std::size_t p = 0; p < rp.peaks.size(); ++p) {
                const double d = std::abs(rp.peaks[p].first - tracks[t].last_lam);
                if (d <= options.link_tolerance_nm) cands.push_back({d, t, p});
            }
        }
        std::sort(cands.begin(), cands.end(),
                  [](const Cand& a, const Cand& b) { return a.dist < b.dist; });
        std::vector<bool> track_used(tracks.size(), false), peak_used(rp.peaks.size(), false);
        for (const auto& c : cands) {
            if (track_used[c.track] || peak_used[c.peak]) continue;
            track_used[c.track] = true;
            peak_used[c.peak] = true;
            auto& t = tracks[c.track];
            t.points[rp.row] = rp.peaks[c.peak];
            t.last_row = rp.row;
            t.last_lam = rp.peaks[c.peak].first;
        }
        for (std::size_t p = 0; p < rp.peaks.size(); ++p) {
            if (peak_used[p]) continue;
            Track t;
            t.points[rp.row] = rp.peaks[p];
            t.last_row = rp.row;
            t.last_lam = rp.peaks[p].first;
            tracks.push_back(std::move(t));
        }
    }

    std::vector<Track> ridges;
    for (auto& t : tracks)
        if (t.points.size() >= static_cast<std::size_t>(options.min_ridge_rows))
            ridges.push_back(std::move(t));
    if (ridges.size() < 2) throw std::runtime_error("no anticrossing in range");

    // Closest pair: smallest wavelength separation over shared rows; a row
    // where the branches merge into one unresolvable peak counts as zero gap.
    const double lam_step = map.wavelength_nm[1] - map.wavelength_nm[0];
    double best_gap = std::numeric_limits<double>::infinity();
    std::size_t best_a = 0, best_b = 0, best_row = 0;
    bool best_merge = false;
    for (std::size_t a = 0; a < ridges.size(); ++a)
        for (std::size_t b = a + 1; b < ridges.size(); ++b) {
            for (const auto& [row, pa] : ridges[a].points) {
                const auto itb = ridges[b].points.find(row);
                if (itb == ridges[b].points.end()) continue;
                const double d = std::abs(pa.first - itb->second.first);
                if (d < best_gap) {
                    best_gap = d;
                    best_a = a;
                    best_b = b;
                    best_row = row;
                    best_merge = false;
                }
            }
            // Interior one-row gap in one branch while the other holds a peak
            // within linking range of both sides: the merged-row signature.
            const std::pair<std::size_t, std::size_t> sides[2] = {{a, b}, {b, a}};
            for (const auto& side : sides) {
                const auto& with = ridges[side.first].points;
                const auto& without = ridges[side.second].points;
                for (const auto& [row, p] : with) {
                    if (row == 0 || without.count(row)) continue;
                    if (!without.count(row - 1) || !without.count(row + 1)) continue;
                    const double interp =
                        0.5 * (without.at(row - 1).first + without.at(row + 1).first);
                    if (std::abs(p.first - interp) <= options.link_tolerance_nm && 0.0 < best_gap) {
                        best_gap = 0.0;
                        best_a = side.first;
                        best_b = side.second;
                        best_row = row;
                        best_merge = true;
                    }
                }
            }
        }
    if (!std::isfinite(best_gap)) throw std::runtime_error("no anticrossing in range");

    const Track& ta = ridges[best_a];
    const Track& tb = ridges[best_b];
    AnticrossingReport rep;
    auto emit = [&](const Track& t, std::vector<RidgePoint>& out) {
        for (const auto& [row, p] : t.points)
            out.push_back({map.parameter[order[row]], p.first, p.second});
    };
    emit(ta, rep.branch_a);
    emit(tb, rep.branch_b);
    rep.gap_nm = best_gap;
    rep.center_parameter = map.parameter[order[best_row]];
    if (best_merge) {
        rep.center_wavelength_nm = ta.points.at(best_row).first;
    } else {
        rep.center_wavelength_nm =
            0.5 * (ta.points.at(best_row).first + tb.points.at(best_row).first);
    }
    rep.is_crossing = best_merge || best_gap <= lam_step + 1e-12;

    double best_f = -std::numeric_limits<double>::infinity();
    for (const Track* t : {&ta, &tb})
        for (const auto& [row, p] : t->points) {
            if (std::llabs(static_cast<long long>(row) - static_cast<long long>(best_row)) >
                options.qbic_window_rows)
                continue;
            if (p.second > best_f) {
                best_f = p.second;
                rep.quasi_bic = {map.parameter[order[row]], p.first, p.second};
            }
        }
    return rep;
}

QuasiBicCount count_quasi_bic(const PurcellMap& map, double window_lo_nm, double window_hi_nm,
                              double threshold, double min_parameter_separation) {
    const std::size_t n = map.parameter.size();
    const std::size_t m = map.wavelength_nm.size();
    if (window_hi_nm <= window_lo_nm) throw std::invalid_argument("empty wavelength window");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return map.parameter[a] < map.parameter[b]; });

    // Best in-window value per row; NaN rows drop out of every comparison.
    std::vector<double> best(n, -std::numeric_limits<double>::infinity());
    std::vector<double> best_lam(n, 0.0);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t r = order[pos];
        if (map.rows[r].failed) continue;
        for (std::size_t c = 0; c < m; ++c) {
            if (map.wavelength_nm[c] < window_lo_nm || map.wavelength_nm[c] > window_hi_nm)
                continue;
            const double v = map.f_p[r * m + c];
            if (v > best[pos]) {
                best[pos] = v;
                best_lam[pos] = map.wavelength_nm[c];
            }
        }
    }

    // Deduplicate on the full candidate set first and filter by threshold
    // afterwards: a weak shoulder next to a strong peak is the same feature at
    // any threshold, and this order makes the count monotone in the threshold.
    std::vector<RidgePoint> cands;
    for (std::size_t pos = 0; pos < n; ++pos) {
        if (!std::isfinite(best[pos])) continue;
        const bool up = pos == 0 || !(best[pos - 1] >= best[pos]);
        const bool down = pos + 1 == n || !(best[pos + 1] > best[pos]);
        if (up && down)
            cands.push_back({map.parameter[order[pos]], best_lam[pos], best[pos]});
    }
    std::sort(cands.begin(), cands.end(),
              [](const RidgePoint& a, const RidgePoint& b) { return a.f_p > b.f_p; });

    QuasiBicCount out;
    std::vector<RidgePoint> kept;
    for (const auto& c : cands) {
        bool close = false;
        for (const auto& k : kept)
            if (std::abs(k.parameter - c.parameter) < min_parameter_separation) close = true;
        if (!close) kept.push_back(c);
    }
    for (const auto& k : kept)
        if (k.f_p > threshold) out.locations.push_back(k);
    std::sort(out.locations.begin(), out.locations.end(),
              [](const RidgePoint& a, const RidgePoint& b) { return a.parameter < b.parameter; });
    out.count = static_cast<int>(out.locations.size());
    return out;
}

}  // namespace nwcav::sweep
