#pragma once

#include "scmatch/splines.hpp"

#include <array>
#include <string>

namespace scmatch {

enum class Side { West, East, South, North };

std::string to_string(Side s);
Side side_from_string(const std::string& s);

/// Four boundary curves of a quadrilateral domain.
///
/// Orientation convention (counterclockwise loop):
///   West(0) = South(0), South(1) = East(0), East(1) = North(1), North(0) = West(1).
/// West and East run along eta, South and North along xi.
struct Brep {
    NurbsCurve west;
    NurbsCurve east;
    NurbsCurve south;
    NurbsCurve north;

    const NurbsCurve& get(Side s) const;
    NurbsCurve& get(Side s);

    /// Corners in counterclockwise order: SW, SE, NE, NW.
    std::array<Point2, 4> corners() const;

    /// Largest corner-closure gap of the loop.
    double closure_gap() const;

    /// Throws InputError if the loop is open beyond tol.
    void check_closed(double tol = 1e-8) const;

    double diameter() const;
};

}  // namespace scmatch
