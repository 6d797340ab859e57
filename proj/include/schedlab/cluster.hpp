#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "schedlab/rng.hpp"

namespace schedlab {

struct VmSpec {
    int id = 0;
    double speed = 0.0;  // work units per time (MIPS)
    int cores = 1;       // C^cpu
    double mem = 0.0;    // C^mem
    double p_idle = 0.0;
    double p_peak = 0.0;

    // Energy per unit of work at full utilization; the efficiency metric
    // behind the AL/NA regime contrasts.
    double peak_per_speed() const { return p_peak / speed; }
};

// The four host-regime contrasts:
//   HS - equal speeds, varied power
//   HP - equal power pair, varied speeds
//   AL - faster VMs are strictly more energy-efficient
//   NA - at least one faster VM is strictly less efficient
enum class HostRegime { HS, HP, AL, NA };

// Classification adds "Mixed" for VM sets matching no regime predicate.
enum class RegimeClass { HS, HP, AL, NA, Mixed };

inline std::string to_string(HostRegime r) {
    switch (r) {
        case HostRegime::HS: return "HS";
        case HostRegime::HP: return "HP";
        case HostRegime::AL: return "AL";
        case HostRegime::NA: return "NA";
    }
    return "?";
}

inline std::string to_string(RegimeClass r) {
    switch (r) {
        case RegimeClass::HS: return "HS";
        case RegimeClass::HP: return "HP";
        case RegimeClass::AL: return "AL";
        case RegimeClass::NA: return "NA";
        case RegimeClass::Mixed: return "mixed";
    }
    return "?";
}

inline HostRegime regime_from_string(const std::string& s) {
    if (s == "HS") return HostRegime::HS;
    if (s == "HP") return HostRegime::HP;
    if (s == "AL") return HostRegime::AL;
    if (s == "NA") return HostRegime::NA;
    throw std::invalid_argument("unknown host regime: " + s);
}

struct Cluster {
    HostRegime regime = HostRegime::HS;
    std::vector<VmSpec> vms;

    int size() const { return static_cast<int>(vms.size()); }
    int total_cores() const {
        int c = 0;
        for (const auto& v : vms) c += v.cores;
        return c;
    }
    double total_mem() const {
        double m = 0.0;
        for (const auto& v : vms) m += v.mem;
        return m;
    }
    int min_cores() const {
        int c = vms.front().cores;
        for (const auto& v : vms) c = std::min(c, v.cores);
        return c;
    }
    double min_mem() const {
        double m = vms.front().mem;
        for (const auto& v : vms) m = std::min(m, v.mem);
        return m;
    }
};

namespace detail {

inline bool all_close(const std::vector<double>& xs, double tol) {
    double lo = *std::min_element(xs.begin(), xs.end());
    double hi = *std::max_element(xs.begin(), xs.end());
    double scale = std::max(std::abs(lo), std::abs(hi));
    return hi - lo <= tol * std::max(scale, 1.0);
}

inline std::vector<int> speed_order(const std::vector<VmSpec>& vms) {
    std::vector<int> idx(vms.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return vms[a].speed < vms[b].speed; });
    return idx;
}

}  // namespace detail

// Returns the regime whose defining predicate holds within `tolerance`
// (relative), or Mixed. Predicates are checked HS, HP, AL, NA in order.
inline RegimeClass classify_regime(const std::vector<VmSpec>& vms, double tolerance = 1e-6) {
    if (vms.size() < 2) throw std::invalid_argument("classify_regime: need >= 2 VMs");

    std::vector<double> speeds, idles, peaks;
    for (const auto& v : vms) {
        speeds.push_back(v.speed);
        idles.push_back(v.p_idle);
        peaks.push_back(v.p_peak);
    }
    if (detail::all_close(speeds, tolerance)) return RegimeClass::HS;
    if (detail::all_close(idles, tolerance) && detail::all_close(peaks, tolerance))
        return RegimeClass::HP;

    auto order = detail::speed_order(vms);
    auto faster = [&](int a, int b) {  // speed of b exceeds a beyond tolerance
        return vms[b].speed - vms[a].speed > tolerance * std::max(vms[b].speed, 1.0);
    };
    auto less_efficient = [&](int a, int b) {  // b burns more energy per work unit
        return vms[b].peak_per_speed() - vms[a].peak_per_speed() >
               tolerance * std::max(vms[b].peak_per_speed(), 1.0);
    };

    bool aligned = true;
    for (std::size_t k = 0; k + 1 < order.size(); ++k)
        if (!faster(order[k], order[k + 1]) || !less_efficient(order[k + 1], order[k]))
            aligned = false;
    if (aligned) return RegimeClass::AL;

    for (std::size_t a = 0; a < order.size(); ++a)
        for (std::size_t b = a + 1; b < order.size(); ++b)
            if (faster(order[a], order[b]) && less_efficient(order[a], order[b]))
                return RegimeClass::NA;
    return RegimeClass::Mixed;
}

namespace detail {

// Speeds for the heterogeneous regimes, 160..800 with enough spread that
// classification at any sane tolerance recovers the regime.
inline std::vector<double> spread_speeds(int n, Rng& rng) {
    std::vector<double> s(n);
    for (;;) {
        for (double& x : s) x = rng.uniform(160.0, 800.0);
        std::vector<double> sorted = s;
        std::sort(sorted.begin(), sorted.end());
        bool ok = true;
        for (int i = 0; i + 1 < n; ++i)
            if (sorted[i + 1] - sorted[i] < 5.0) ok = false;
        if (ok) return s;
    }
}

}  // namespace detail

// Draws a cluster whose VMs satisfy the regime's defining predicate by
// construction (rejection sampling, so regimes are never accidental).
inline std::vector<VmSpec> sample_regime(HostRegime regime, int n_vms, std::uint64_t rng_seed) {
    if (n_vms < 2)
        throw std::invalid_argument("sample_regime: regime contrasts need >= 2 VMs");

    for (std::uint64_t attempt = 0; attempt < 256; ++attempt) {
        Rng rng(derive_seed(rng_seed, "regime/" + to_string(regime), attempt));
        std::vector<VmSpec> vms(n_vms);
        for (int i = 0; i < n_vms; ++i) {
            vms[i].id = i;
            vms[i].cores = rng.uniform_int(0, 1) == 0 ? 4 : 8;
            vms[i].mem = rng.uniform(16.0, 64.0);
        }
        switch (regime) {
            case HostRegime::HS: {
                for (auto& v : vms) {
                    v.speed = 500.0;
                    v.p_idle = rng.uniform(50.0, 150.0);
                    v.p_peak = v.p_idle * rng.uniform(1.5, 3.0);
                }
                break;
            }
            case HostRegime::HP: {
                double p_idle = rng.uniform(50.0, 150.0);
                double p_peak = p_idle * rng.uniform(1.5, 3.0);
                auto speeds = detail::spread_speeds(n_vms, rng);
                for (int i = 0; i < n_vms; ++i) {
                    vms[i].speed = speeds[i];
                    vms[i].p_idle = p_idle;
                    vms[i].p_peak = p_peak;
                }
                break;
            }
            case HostRegime::AL: {
                auto speeds = detail::spread_speeds(n_vms, rng);
                std::vector<double> eff(n_vms);
                for (;;) {
                    for (double& e : eff) e = rng.uniform(0.15, 0.45);
                    std::sort(eff.begin(), eff.end(), std::greater<>());
                    bool ok = true;
                    for (int i = 0; i + 1 < n_vms; ++i)
                        if (eff[i] - eff[i + 1] < 0.005) ok = false;
                    if (ok) break;
                }
                std::vector<double> sorted = speeds;
                std::sort(sorted.begin(), sorted.end());
                for (int i = 0; i < n_vms; ++i) {
                    // slowest VM gets the worst energy-per-work
                    auto rank = std::find(sorted.begin(), sorted.end(), speeds[i]) -
                                sorted.begin();
                    vms[i].speed = speeds[i];
                    vms[i].p_peak = eff[rank] * speeds[i];
                    vms[i].p_idle = vms[i].p_peak * rng.uniform(0.3, 0.6);
                }
                break;
            }
            case HostRegime::NA: {
                auto speeds = detail::spread_speeds(n_vms, rng);
                for (int i = 0; i < n_vms; ++i) {
                    vms[i].speed = speeds[i];
                    vms[i].p_peak = rng.uniform(0.15, 0.45) * speeds[i];
                    vms[i].p_idle = vms[i].p_peak * rng.uniform(0.3, 0.6);
                }
                break;
            }
        }
        RegimeClass got = classify_regime(vms, 1e-6);
        bool matches = (regime == HostRegime::HS && got == RegimeClass::HS) ||
                       (regime == HostRegime::HP && got == RegimeClass::HP) ||
                       (regime == HostRegime::AL && got == RegimeClass::AL) ||
                       (regime == HostRegime::NA && got == RegimeClass::NA);
        if (matches) return vms;
    }
    throw std::runtime_error("sample_regime: rejection sampling did not converge");
}

inline nlohmann::json to_json(const Cluster& cluster) {
    nlohmann::json j;
    j["regime"] = to_string(cluster.regime);
    j["vms"] = nlohmann::json::array();
    for (const VmSpec& v : cluster.vms) {
        nlohmann::json jv;
        jv["id"] = v.id;
        jv["speed"] = v.speed;
        jv["cores"] = v.cores;
        jv["mem"] = v.mem;
        jv["p_idle"] = v.p_idle;
        jv["p_peak"] = v.p_peak;
        j["vms"].push_back(jv);
    }
    return j;
}

inline Cluster cluster_from_json(const nlohmann::json& j) {
    Cluster c;
    c.regime = regime_from_string(j.at("regime").get<std::string>());
    for (const auto& jv : j.at("vms")) {
        VmSpec v;
        v.id = jv.at("id").get<int>();
        v.speed = jv.at("speed").get<double>();
        v.cores = jv.at("cores").get<int>();
        v.mem = jv.at("mem").get<double>();
        v.p_idle = jv.at("p_idle").get<double>();
        v.p_peak = jv.at("p_peak").get<double>();
        if (!(v.speed > 0.0) || v.cores < 1 || !(v.mem > 0.0) || v.p_idle < 0.0 ||
            v.p_peak < v.p_idle)
            throw std::invalid_argument("cluster_from_json: invalid vm " + std::to_string(v.id));
        c.vms.push_back(v);
    }
    if (c.vms.size() < 2) throw std::invalid_argument("cluster_from_json: need >= 2 VMs");
    return c;
}

}  // namespace schedlab
