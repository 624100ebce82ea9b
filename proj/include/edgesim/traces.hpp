#ifndef EDGESIM_TRACES_HPP
#define EDGESIM_TRACES_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgesim/rng.hpp"
#include "edgesim/topology.hpp"

namespace edgesim {

// One GPS fix from a taxi feed: `id;YYYY-MM-DD HH:MM:SS.ffffff+TZ;POINT(lat lon)`
struct TraceRecord {
    long vehicle_id = 0;
    double timestamp = 0.0;  // seconds since epoch, UTC, fractional
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// Slotted planar trajectory: one position per time slot, inside the region.
struct VehicleTrace {
    long vehicle_id = 0;
    std::vector<Position> positions;
};

struct BoundingBox {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;

    void validate() const {
        if (!(lat_min < lat_max) || !(lon_min < lon_max))
            throw std::invalid_argument("bounding box must have min < max on both axes");
    }
};

struct ParseStats {
    std::size_t parsed = 0;
    std::size_t skipped = 0;
};

namespace detail {

// days since 1970-01-01 for a proleptic Gregorian date
inline long long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097LL + static_cast<long long>(doe) - 719468LL;
}

inline void civil_from_days(long long z, int& y, int& m, int& d) {
    z += 719468;
    const long long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long long yy = static_cast<long long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    y = static_cast<int>(yy + (m <= 2));
}

// `2014-02-01 00:00:00.739166+01` -> epoch seconds; false on malformed input
inline bool parse_timestamp(const std::string& text, double& out) {
    int y, mo, d, h, mi;
    int n = 0;
    if (std::sscanf(text.c_str(), "%d-%d-%d %d:%d:%n", &y, &mo, &d, &h, &mi, &n) != 5 || n == 0)
        return false;
    const char* rest = text.c_str() + n;
    char* end = nullptr;
    const double seconds = std::strtod(rest, &end);
    if (end == rest || seconds < 0.0 || seconds >= 61.0) return false;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59) return false;

    double tz_seconds = 0.0;
    if (*end == '+' || *end == '-') {
        const int sign = (*end == '+') ? 1 : -1;
        int tzh = 0, tzm = 0;
        const char* tz = end + 1;
        char* tzend = nullptr;
        tzh = static_cast<int>(std::strtol(tz, &tzend, 10));
        if (tzend == tz) return false;
        if (*tzend == ':') tzm = static_cast<int>(std::strtol(tzend + 1, nullptr, 10));
        tz_seconds = sign * (tzh * 3600.0 + tzm * 60.0);
    } else if (*end != '\0' && *end != 'Z') {
        return false;
    }

    out = static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 + h * 3600.0 + mi * 60.0 +
          seconds - tz_seconds;
    return true;
}

inline bool parse_point(const std::string& text, double& lat, double& lon) {
    return std::sscanf(text.c_str(), " POINT(%lf %lf)", &lat, &lon) == 2;
}

}  // namespace detail

inline bool parse_trace_line(const std::string& line, TraceRecord& out) {
    const auto first = line.find(';');
    if (first == std::string::npos) return false;
    const auto second = line.find(';', first + 1);
    if (second == std::string::npos) return false;

    char* idend = nullptr;
    const long id = std::strtol(line.c_str(), &idend, 10);
    if (idend != line.c_str() + first) return false;

    double ts;
    if (!detail::parse_timestamp(line.substr(first + 1, second - first - 1), ts)) return false;
    double lat, lon;
    if (!detail::parse_point(line.substr(second + 1), lat, lon)) return false;
    if (!std::isfinite(lat) || !std::isfinite(lon)) return false;

    out = {id, ts, lat, lon};
    return true;
}

// UTC rendering with nanosecond fraction; parse_trace_line inverts it exactly.
inline std::string format_trace_record(const TraceRecord& r) {
    const double days = std::floor(r.timestamp / 86400.0);
    double rem = r.timestamp - days * 86400.0;
    int y, mo, d;
    detail::civil_from_days(static_cast<long long>(days), y, mo, d);
    const int h = static_cast<int>(rem / 3600.0);
    rem -= h * 3600.0;
    const int mi = static_cast<int>(rem / 60.0);
    rem -= mi * 60.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%ld;%04d-%02d-%02d %02d:%02d:%012.9f+00;POINT(%.17g %.17g)",
                  r.vehicle_id, y, mo, d, h, mi, rem, r.lat, r.lon);
    return buf;
}

// Malformed lines are counted and skipped; output sorted by (vehicle, time)
// with exact per-vehicle duplicate timestamps dropped.
inline std::vector<TraceRecord> parse_trace_stream(std::istream& in, ParseStats* stats = nullptr) {
    std::vector<TraceRecord> records;
    ParseStats local;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        TraceRecord r;
        if (parse_trace_line(line, r)) {
            records.push_back(r);
            ++local.parsed;
        } else {
            ++local.skipped;
        }
    }
    if (stats) *stats = local;
    if (records.empty()) throw std::runtime_error("no parsable trace records in input");

    std::sort(records.begin(), records.end(), [](const TraceRecord& a, const TraceRecord& b) {
        if (a.vehicle_id != b.vehicle_id) return a.vehicle_id < b.vehicle_id;
        return a.timestamp < b.timestamp;
    });
    records.erase(std::unique(records.begin(), records.end(),
                              [](const TraceRecord& a, const TraceRecord& b) {
                                  return a.vehicle_id == b.vehicle_id &&
                                         a.timestamp == b.timestamp;
                              }),
                  records.end());
    return records;
}

// Fixed-slot resampling: linear interpolation between bracketing fixes,
// constant extrapolation outside the recorded span, bbox clamp, then an
// affine map of lat/lon onto the square region. Vehicles with no fix inside
// the sampling window are dropped; survivors are ordered by in-window fix
// count (descending) so callers wanting the n best-covered vehicles take the
// first n.
inline std::vector<VehicleTrace> resample_to_slots(const std::vector<TraceRecord>& records,
                                                   const BoundingBox& bbox, double region_side,
                                                   double slot_seconds, int slots,
                                                   double start_time) {
    bbox.validate();
    if (slots < 1) throw std::invalid_argument("slot count must be >= 1");
    if (!(slot_seconds > 0.0)) throw std::invalid_argument("slot duration must be > 0");
    if (!(region_side > 0.0)) throw std::invalid_argument("region_side must be > 0");

    std::map<long, std::vector<TraceRecord>> by_vehicle;
    for (const auto& r : records) by_vehicle[r.vehicle_id].push_back(r);

    const double window_end = start_time + slot_seconds * slots;
    auto project = [&](double lat, double lon) {
        const double clat = std::clamp(lat, bbox.lat_min, bbox.lat_max);
        const double clon = std::clamp(lon, bbox.lon_min, bbox.lon_max);
        return Position{(clon - bbox.lon_min) / (bbox.lon_max - bbox.lon_min) * region_side,
                        (clat - bbox.lat_min) / (bbox.lat_max - bbox.lat_min) * region_side};
    };

    struct Entry {
        VehicleTrace trace;
        std::size_t in_window = 0;
    };
    std::vector<Entry> survivors;
    for (auto& [id, recs] : by_vehicle) {
        std::sort(recs.begin(), recs.end(),
                  [](const TraceRecord& a, const TraceRecord& b) { return a.timestamp < b.timestamp; });
        std::size_t in_window = 0;
        for (const auto& r : recs)
            if (r.timestamp >= start_time && r.timestamp <= window_end) ++in_window;
        if (in_window == 0) continue;

        VehicleTrace trace;
        trace.vehicle_id = id;
        trace.positions.reserve(static_cast<std::size_t>(slots));
        for (int k = 0; k < slots; ++k) {
            const double t = start_time + k * slot_seconds;
            double lat, lon;
            if (t <= recs.front().timestamp) {
                lat = recs.front().lat;
                lon = recs.front().lon;
            } else if (t >= recs.back().timestamp) {
                lat = recs.back().lat;
                lon = recs.back().lon;
            } else {
                auto hi = std::lower_bound(recs.begin(), recs.end(), t,
                                           [](const TraceRecord& r, double v) { return r.timestamp < v; });
                auto lo = hi - 1;
                const double w = (t - lo->timestamp) / (hi->timestamp - lo->timestamp);
                lat = lo->lat + w * (hi->lat - lo->lat);
                lon = lo->lon + w * (hi->lon - lo->lon);
            }
            trace.positions.push_back(project(lat, lon));
        }
        survivors.push_back({std::move(trace), in_window});
    }
    if (survivors.empty()) throw std::runtime_error("no vehicle overlaps the sampling window");

    std::sort(survivors.begin(), survivors.end(), [](const Entry& a, const Entry& b) {
        if (a.in_window != b.in_window) return a.in_window > b.in_window;
        return a.trace.vehicle_id < b.trace.vehicle_id;
    });
    std::vector<VehicleTrace> out;
    out.reserve(survivors.size());
    for (auto& e : survivors) out.push_back(std::move(e.trace));
    return out;
}

enum class MobilityModel { random_waypoint, linear };

inline MobilityModel mobility_from_string(const std::string& s) {
    if (s == "random_waypoint") return MobilityModel::random_waypoint;
    if (s == "linear") return MobilityModel::linear;
    throw std::invalid_argument("unknown mobility model: " + s);
}

// Seeded synthetic mobility for tests and desk-scale runs. Per-vehicle seed
// streams keep trace u independent of the vehicle count.
inline std::vector<VehicleTrace> synthetic_traces(MobilityModel model, int n_vehicles, int slots,
                                                  double region_side, double speed_mps,
                                                  std::uint64_t seed, double slot_seconds = 60.0) {
    if (n_vehicles < 1 || slots < 1) throw std::invalid_argument("need >= 1 vehicle and slot");
    if (speed_mps < 0.0) throw std::invalid_argument("speed must be >= 0");
    if (!(region_side > 0.0)) throw std::invalid_argument("region_side must be > 0");

    std::vector<VehicleTrace> traces;
    traces.reserve(static_cast<std::size_t>(n_vehicles));
    const double step = speed_mps * slot_seconds;

    for (int u = 0; u < n_vehicles; ++u) {
        Rng rng(derive_seed(seed, "trace", static_cast<std::uint64_t>(u)));
        VehicleTrace trace;
        trace.vehicle_id = u;
        trace.positions.reserve(static_cast<std::size_t>(slots));

        double x = rng.uniform(0.0, region_side);
        double y = rng.uniform(0.0, region_side);

        if (model == MobilityModel::linear) {
            const double heading = rng.uniform(0.0, 2.0 * M_PI);
            double vx = std::cos(heading);
            double vy = std::sin(heading);
            for (int k = 0; k < slots; ++k) {
                trace.positions.push_back({x, y});
                x += vx * step;
                y += vy * step;
                // specular reflection at the region boundary
                while (x < 0.0 || x > region_side) {
                    x = (x < 0.0) ? -x : 2.0 * region_side - x;
                    vx = -vx;
                }
                while (y < 0.0 || y > region_side) {
                    y = (y < 0.0) ? -y : 2.0 * region_side - y;
                    vy = -vy;
                }
            }
        } else {
            double tx = rng.uniform(0.0, region_side);
            double ty = rng.uniform(0.0, region_side);
            for (int k = 0; k < slots; ++k) {
                trace.positions.push_back({x, y});
                double remaining = step;
                while (remaining > 0.0) {
                    const double dist = std::hypot(tx - x, ty - y);
                    if (dist <= remaining) {
                        x = tx;
                        y = ty;
                        remaining -= dist;
                        tx = rng.uniform(0.0, region_side);
                        ty = rng.uniform(0.0, region_side);
                        if (dist == 0.0 && speed_mps == 0.0) break;
                        if (dist == 0.0) continue;
                    } else {
                        x += (tx - x) / dist * remaining;
                        y += (ty - y) / dist * remaining;
                        remaining = 0.0;
                    }
                }
            }
        }
        traces.push_back(std::move(trace));
    }
    return traces;
}

// CSV schema: vehicle_id,slot,x_m,y_m
inline void write_trace_csv(std::ostream& out, const std::vector<VehicleTrace>& traces) {
    out << "vehicle_id,slot,x_m,y_m\n";
    char buf[96];
    for (const auto& t : traces) {
        for (std::size_t k = 0; k < t.positions.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%ld,%zu,%.17g,%.17g\n", t.vehicle_id, k,
                          t.positions[k].x, t.positions[k].y);
            out << buf;
        }
    }
}

// Vehicles come back in file order, preserving the coverage ranking that
// resample_to_slots wrote.
inline std::vector<VehicleTrace> read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trace csv");
    std::vector<VehicleTrace> traces;
    std::map<long, std::size_t> index_of;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        long id;
        std::size_t slot;
        double x, y;
        if (std::sscanf(line.c_str(), "%ld,%zu,%lf,%lf", &id, &slot, &x, &y) != 4)
            throw std::runtime_error("malformed trace csv row: " + line);
        auto [it, inserted] = index_of.try_emplace(id, traces.size());
        if (inserted) traces.push_back({id, {}});
        auto& positions = traces[it->second].positions;
        if (slot != positions.size())
            throw std::runtime_error("trace csv slots out of order for vehicle " + std::to_string(id));
        positions.push_back({x, y});
    }
    if (traces.empty()) throw std::runtime_error("trace csv has no rows");
    return traces;
}

}  // namespace edgesim

#endif
