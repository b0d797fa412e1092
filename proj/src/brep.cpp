#include "scmatch/brep.hpp"

#include "scmatch/error.hpp"

#include <algorithm>

namespace scmatch {

std::string to_string(Side s) {
    switch (s) {
        case Side::West: return "West";
        case Side::East: return "East";
        case Side::South: return "South";
        case Side::North: return "North";
    }
    return "?";
}

Side side_from_string(const std::string& s) {
    if (s == "West") return Side::West;
    if (s == "East") return Side::East;
    if (s == "South") return Side::South;
    if (s == "North") return Side::North;
    throw InputError("unknown side label \"" + s + "\"");
}

const NurbsCurve& Brep::get(Side s) const {
    switch (s) {
        case Side::West: return west;
        case Side::East: return east;
        case Side::South: return south;
        case Side::North: break;
    }
    return north;
}

NurbsCurve& Brep::get(Side s) {
    return const_cast<NurbsCurve&>(static_cast<const Brep&>(*this).get(s));
}

std::array<Point2, 4> Brep::corners() const {
    return {south.front(), east.front(), east.back(), west.back()};
}

double Brep::closure_gap() const {
    return std::max({(west.front() - south.front()).norm(), (south.back() - east.front()).norm(),
                     (east.back() - north.back()).norm(), (north.front() - west.back()).norm()});
}

void Brep::check_closed(double tol) const {
    const double gap = closure_gap();
    if (gap > tol * std::max(1.0, diameter()))
        throw InputError("boundary loop is open (corner gap " + std::to_string(gap) + ")");
}

double Brep::diameter() const {
    Point2 lo = west.front(), hi = west.front();
    for (const auto* c : {&west, &east, &south, &north}) {
        for (const auto& p : c->control_points()) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
    }
    return (hi - lo).norm();
}

}  // namespace scmatch
