#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "ccdae/core_distance.hpp"
#include "ccdae/pipeline.hpp"

namespace ccdae {

/// Reporting units. Capacities and losses scale by 1/ln 2 in bits and areas
/// by 1/ln² 2; computation is always in nats.
enum class Units { nats, bits };

Units parse_units(std::string_view name);
const char* to_string(Units u) noexcept;
/// Factor applied to a nats quantity (capacity, loss, Δ, d).
double unit_scale(Units u) noexcept;

/// Shortest decimal that round-trips to the same double.
std::string format_number(double v);

/// CSV with header `capacity,delta_2_to_1,delta_1_to_2,distance`.
void write_curve_csv(std::ostream& out, const DistanceCurve& curve, Units units = Units::nats);

/// JSON document with auc, c_max, λ grid, loss mode and the curve arrays.
std::string curve_report_json(const DistanceCurve& curve, LossMode mode, Units units = Units::nats);

/// JSON document for a comparison: inputs, backend id, config echo, curve,
/// auc, explanations and diagnostics. Contains no timing, so it is
/// byte-identical across runs with the same seed and backend.
std::string report_json(const DistanceReport& report, Units units = Units::nats);

/// Ranked plain-text table of shared and distinctive descriptions.
std::string render_explanation(const Explanation& e);

}  // namespace ccdae
