#pragma once

#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "gridcp/case_io.hpp"
#include "gridcp/powerflow.hpp"

namespace gridcp {

struct Scenario {
    long id = 0;
    int k = 0;
    std::vector<int> outages;       // branch ids, sorted ascending
    std::vector<double> load_scale; // per bus, aligned with case.buses
    std::vector<double> gen_scale;  // per generator, aligned with case.generators
    std::uint64_t seed = 0;         // sub-stream seed that produced this draw
};

struct ScenarioSpec {
    std::vector<std::pair<int, long>> k_levels; // (k, count), ascending k
    double load_lo = 0.8;
    double load_hi = 1.2;
    double gen_jitter = 0.0; // relative, uniform in [-j, +j] per generator
    std::uint64_t seed = 0;
};

// Case with the scenario applied: outaged branches removed, loads and
// generator setpoints scaled. Branch ids are preserved so loadings map back.
inline GridCase apply_scenario(const GridCase& grid, const Scenario& sc) {
    if (sc.load_scale.size() != grid.buses.size())
        throw DimensionMismatchError("scenario load_scale has " +
                                     std::to_string(sc.load_scale.size()) +
                                     " entries for " +
                                     std::to_string(grid.buses.size()) + " buses");
    if (sc.gen_scale.size() != grid.generators.size())
        throw DimensionMismatchError("scenario gen_scale has " +
                                     std::to_string(sc.gen_scale.size()) +
                                     " entries for " +
                                     std::to_string(grid.generators.size()) +
                                     " generators");
    GridCase out = grid;
    for (std::size_t i = 0; i < out.buses.size(); ++i) {
        out.buses[i].p_load *= sc.load_scale[i];
        out.buses[i].q_load *= sc.load_scale[i];
    }
    for (std::size_t i = 0; i < out.generators.size(); ++i)
        out.generators[i].p_set *= sc.gen_scale[i];
    if (!sc.outages.empty()) {
        std::vector<Branch> kept;
        kept.reserve(out.branches.size());
        for (const auto& br : out.branches)
            if (!std::binary_search(sc.outages.begin(), sc.outages.end(), br.id))
                kept.push_back(br);
        out.branches = std::move(kept);
    }
    return out;
}

namespace detail {

inline bool connected_without(const GridCase& grid,
                              const std::vector<int>& outage_ids) {
    std::map<int, std::size_t> pos;
    for (std::size_t i = 0; i < grid.buses.size(); ++i) pos[grid.buses[i].id] = i;
    UnionFind uf(grid.buses.size());
    for (const auto& br : grid.branches) {
        if (std::binary_search(outage_ids.begin(), outage_ids.end(), br.id)) continue;
        uf.unite(pos.at(br.from_bus), pos.at(br.to_bus));
    }
    return uf.single_component();
}

} // namespace detail

// Rejection-sampled N-k scenario generation. Outage sets are uniform over
// k-subsets of the outage-eligible branches; draws that island any bus are
// resampled. Per-bus load multipliers are iid uniform on [lo, hi]; generator
// setpoints are rescaled so total generation tracks total scaled load, with
// optional per-unit jitter. Fully determined by (case, spec).
inline std::vector<Scenario> generate_scenarios(const GridCase& grid,
                                                const ScenarioSpec& spec,
                                                long first_id = 0) {
    if (!(spec.load_lo > 0) || spec.load_lo > spec.load_hi)
        throw ValidationError("load_range requires 0 < lo <= hi");
    std::vector<int> eligible;
    for (const auto& br : grid.branches)
        if (br.outage_eligible) eligible.push_back(br.id);

    const double base_gen = grid.total_p_set();

    std::vector<Scenario> out;
    long next_id = first_id;
    for (const auto& [k, count] : spec.k_levels) {
        if (count <= 0) throw ValidationError("scenario count must be > 0");
        if (k < 0 || static_cast<std::size_t>(k) >= eligible.size())
            throw ValidationError("k=" + std::to_string(k) + " requires fewer than " +
                                  std::to_string(eligible.size()) +
                                  " outage-eligible branches");
        const std::uint64_t stream_seed =
            derive_seed(spec.seed, static_cast<std::uint64_t>(k));
        Rng rng(stream_seed);
        long accepted = 0;
        long attempts = 0;
        const long attempt_budget = 1000 * count;
        while (accepted < count) {
            if (++attempts > attempt_budget)
                throw ExhaustedSamplingError(
                    "rejection rate too high for k=" + std::to_string(k) + " (" +
                    std::to_string(accepted) + "/" + std::to_string(count) +
                    " accepted in " + std::to_string(attempts - 1) + " attempts)");
            Scenario sc;
            sc.id = next_id;
            sc.k = k;
            sc.seed = stream_seed;
            // k distinct eligible branches, then loads, then gen jitter;
            // a rejected draw discards the whole tuple
            std::vector<int> pool = eligible;
            for (int d = 0; d < k; ++d) {
                const auto j = static_cast<std::size_t>(
                    rng.uniform_int(static_cast<std::uint64_t>(pool.size())));
                sc.outages.push_back(pool[j]);
                pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
            }
            std::sort(sc.outages.begin(), sc.outages.end());
            sc.load_scale.reserve(grid.buses.size());
            for (std::size_t b = 0; b < grid.buses.size(); ++b)
                sc.load_scale.push_back(rng.uniform(spec.load_lo, spec.load_hi));
            double scaled_load = 0.0;
            for (std::size_t b = 0; b < grid.buses.size(); ++b)
                scaled_load += grid.buses[b].p_load * sc.load_scale[b];
            const double ratio = base_gen > 0 ? scaled_load / base_gen : 1.0;
            sc.gen_scale.reserve(grid.generators.size());
            for (std::size_t g = 0; g < grid.generators.size(); ++g)
                sc.gen_scale.push_back(
                    ratio * (1.0 + rng.uniform(-spec.gen_jitter, spec.gen_jitter)));
            if (!detail::connected_without(grid, sc.outages)) continue;
            ++accepted;
            ++next_id;
            out.push_back(std::move(sc));
        }
    }
    return out;
}

struct LabeledScenario {
    Scenario scenario;
    std::vector<std::pair<int, double>> true_loadings; // (branch id, L), case order
    ACSolution ac;
};

struct Discarded {
    long scenario_id = 0;
    std::string reason;
};

using LabelResult = std::variant<LabeledScenario, Discarded>;

inline LabelResult label(const GridCase& grid, const Scenario& sc,
                         const AcOptions& opt = {}) {
    const GridCase applied = apply_scenario(grid, sc);
    ACSolution ac = solve_ac(applied, opt);
    if (!ac.converged)
        return Discarded{sc.id, "ac diverged after " +
                                    std::to_string(ac.iterations) +
                                    " iterations, mismatch " +
                                    format_double(ac.max_mismatch)};
    LabeledScenario out;
    out.scenario = sc;
    const auto v = ac.voltages();
    out.true_loadings.reserve(applied.branches.size());
    for (const auto& br : applied.branches)
        out.true_loadings.emplace_back(br.id, line_loading(applied, v, br));
    out.ac = std::move(ac);
    return out;
}

// ---------------------------------------------------------------------------
// Scenario representation z(x): raw input features (scaled loads, scaled
// generator setpoints, outage indicators) standardized with moments fitted on
// the calibration split. Zero-variance dimensions are dropped and recorded.
// ---------------------------------------------------------------------------

struct Embedding {
    std::vector<double> z;
};

struct EmbeddingStats {
    std::vector<double> mean;  // raw dimension moments
    std::vector<double> stdev;
    std::vector<int> kept;     // indices of retained raw dimensions
    int raw_dim = 0;
    std::uint64_t case_fingerprint = 0;
};

inline std::vector<double> embed_raw(const GridCase& grid, const Scenario& sc) {
    if (sc.load_scale.size() != grid.buses.size() ||
        sc.gen_scale.size() != grid.generators.size())
        throw DimensionMismatchError("scenario does not match case dimensions");
    std::vector<double> z;
    z.reserve(2 * grid.buses.size() + grid.generators.size() + grid.branches.size());
    for (std::size_t b = 0; b < grid.buses.size(); ++b)
        z.push_back(grid.buses[b].p_load * sc.load_scale[b]);
    for (std::size_t b = 0; b < grid.buses.size(); ++b)
        z.push_back(grid.buses[b].q_load * sc.load_scale[b]);
    for (std::size_t g = 0; g < grid.generators.size(); ++g)
        z.push_back(grid.generators[g].p_set * sc.gen_scale[g]);
    for (const auto& br : grid.branches)
        z.push_back(std::binary_search(sc.outages.begin(), sc.outages.end(), br.id)
                        ? 1.0
                        : 0.0);
    return z;
}

template <typename ScenarioRange>
EmbeddingStats fit_embedding_stats(const GridCase& grid, const ScenarioRange& cal) {
    EmbeddingStats st;
    st.case_fingerprint = case_fingerprint(grid);
    std::size_t n = 0;
    std::vector<double> sum, sum_sq;
    for (const auto& sc : cal) {
        const auto z = embed_raw(grid, sc);
        if (sum.empty()) {
            sum.assign(z.size(), 0.0);
            sum_sq.assign(z.size(), 0.0);
        }
        for (std::size_t i = 0; i < z.size(); ++i) {
            sum[i] += z[i];
            sum_sq[i] += z[i] * z[i];
        }
        ++n;
    }
    if (n == 0) throw ValidationError("cannot fit embedding stats on empty split");
    st.raw_dim = static_cast<int>(sum.size());
    st.mean.resize(sum.size());
    st.stdev.resize(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) {
        st.mean[i] = sum[i] / static_cast<double>(n);
        const double var =
            std::max(0.0, sum_sq[i] / static_cast<double>(n) - st.mean[i] * st.mean[i]);
        st.stdev[i] = std::sqrt(var);
        if (st.stdev[i] > 1e-12) st.kept.push_back(static_cast<int>(i));
    }
    return st;
}

inline Embedding embed(const GridCase& grid, const Scenario& sc,
                       const EmbeddingStats& st) {
    if (st.case_fingerprint != case_fingerprint(grid))
        throw DimensionMismatchError(
            "embedding stats were fitted on a different case");
    const auto raw = embed_raw(grid, sc);
    if (static_cast<int>(raw.size()) != st.raw_dim)
        throw DimensionMismatchError("embedding raw dimension " +
                                     std::to_string(raw.size()) + " != fitted " +
                                     std::to_string(st.raw_dim));
    Embedding e;
    e.z.reserve(st.kept.size());
    for (int idx : st.kept) {
        const auto i = static_cast<std::size_t>(idx);
        e.z.push_back((raw[i] - st.mean[i]) / st.stdev[i]);
    }
    return e;
}

} // namespace gridcp
