#ifndef EDGESIM_DELAY_HPP
#define EDGESIM_DELAY_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgesim {

// Sizes are kept in bits internally; configuration accepts megabytes.
constexpr double kBitsPerMegabyte = 8e6;

inline double megabytes_to_bits(double mb) { return mb * kBitsPerMegabyte; }

// Physical constants of the link and server model.
struct DelayParams {
    double backhaul_rate = 5e8;       // chi, bit/s
    double migration_coeff = 1.5;     // mu_y, s per hop of migrated state
    double transmission_coeff = 0.3;  // mu_h, s per hop of relayed task data
    double noise_power = 1e-13;       // sigma^2, W
    double unit_gain = 1e-5;          // alpha, channel gain at unit distance
    double bs_bandwidth = 2e7;        // B, Hz per base station
    double server_capacity = 6e10;    // F, cycles/s per edge server

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0)) throw std::invalid_argument(std::string(name) + " must be > 0");
        };
        positive(backhaul_rate, "backhaul_rate");
        positive(migration_coeff, "migration_coeff");
        positive(transmission_coeff, "transmission_coeff");
        positive(noise_power, "noise_power");
        positive(unit_gain, "unit_gain");
        positive(bs_bandwidth, "bs_bandwidth");
        positive(server_capacity, "server_capacity");
    }
};

// One offloaded task: payload size, cycles per bit, vehicle radio power.
struct TaskSpec {
    double data_bits = 0.0;
    double compute_density = 0.0;  // cycles/bit
    double tx_power = 0.0;         // W
};

// Accumulated per-vehicle service state that moves on migration.
struct ServiceProfile {
    double service_bits = 0.0;
};

struct DelayBreakdown {
    double migration = 0.0;    // MT
    double access = 0.0;       // PT
    double backhaul = 0.0;     // ST
    double computation = 0.0;  // CT

    double communication() const { return access + backhaul; }
    double total() const { return migration + access + backhaul + computation; }
};

// Service relocation cost: zero when staying, otherwise state transfer over
// the backhaul plus a per-hop handoff term.
inline double migration_delay(const ServiceProfile& service, int hops, const DelayParams& p) {
    if (hops < 0) throw std::invalid_argument("hop count must be >= 0");
    if (hops == 0) return 0.0;
    return service.service_bits / p.backhaul_rate + p.migration_coeff * hops;
}

// Inverse-square path loss; singular at zero distance, callers clamp.
inline double snr(const TaskSpec& task, double distance_m, const DelayParams& p) {
    if (!(distance_m > 0.0)) throw std::invalid_argument("snr distance must be > 0");
    return task.tx_power * p.unit_gain / (p.noise_power * distance_m * distance_m);
}

// Uplink time over the vehicle's bandwidth share at the given SNR.
inline double access_delay(const TaskSpec& task, double bandwidth_share_hz, double snr_value) {
    if (!(bandwidth_share_hz > 0.0)) throw std::invalid_argument("bandwidth share must be > 0");
    if (!(snr_value > 0.0)) throw std::invalid_argument("snr must be > 0");
    return task.data_bits / (bandwidth_share_hz * std::log2(1.0 + snr_value));
}

// Task relay cost when serving node != attached node.
inline double backhaul_delay(const TaskSpec& task, int hops, const DelayParams& p) {
    if (hops < 0) throw std::invalid_argument("hop count must be >= 0");
    if (hops == 0) return 0.0;
    return task.data_bits / p.backhaul_rate + p.transmission_coeff * hops;
}

inline double required_cycles(const TaskSpec& task) {
    return task.data_bits * task.compute_density;
}

// Processing time under a fractional share of the server.
inline double computation_delay(double cycles, double proportion, const DelayParams& p) {
    if (!(proportion > 0.0) || proportion > 1.0)
        throw std::invalid_argument("allocation proportion must be in (0, 1]");
    if (cycles < 0.0) throw std::invalid_argument("cycles must be >= 0");
    return cycles / (proportion * p.server_capacity);
}

// System delay of one slot: sum over vehicles of all four components.
inline double slot_total(const std::vector<DelayBreakdown>& breakdowns) {
    double sum = 0.0;
    for (const auto& b : breakdowns) sum += b.total();
    return sum;
}

}  // namespace edgesim

#endif
