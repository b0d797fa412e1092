#include "helpers.hpp"

#include "scmatch/error.hpp"
#include "scmatch/io.hpp"
#include "scmatch/matching.hpp"
#include "scmatch/paramgen.hpp"
#include "scmatch/quality.hpp"

#include <doctest.h>

#include <fstream>
#include <regex>
#include <set>
#include <vector>

using namespace scmatch;

namespace {

std::string dump(const Json& j) { return j.dump(2); }

/// Minimal well-formedness check: balanced, properly nested tags, quoted
/// attributes, one root element.
bool well_formed_xml(const std::string& text, std::string& why) {
    std::vector<std::string> stack;
    int roots = 0;
    std::size_t pos = 0;
    while ((pos = text.find('<', pos)) != std::string::npos) {
        if (text.compare(pos, 4, "<!--") == 0) {
            const auto end = text.find("-->", pos);
            if (end == std::string::npos) return why = "unterminated comment", false;
            pos = end + 3;
            continue;
        }
        std::size_t end = pos + 1;
        char quote = 0;
        for (; end < text.size(); ++end) {
            const char c = text[end];
            if (quote) {
                if (c == quote) quote = 0;
            } else if (c == '"' || c == '\'') {
                quote = c;
            } else if (c == '<') {
                return why = "'<' inside a tag", false;
            } else if (c == '>') {
                break;
            }
        }
        if (end >= text.size()) return why = "unterminated tag", false;
        const std::string tag = text.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        if (tag.empty()) return why = "empty tag", false;
        if (tag.front() == '?' || tag.front() == '!') continue;
        const auto name_of = [](const std::string& t) { return t.substr(0, t.find_first_of(" \t\n/")); };
        if (tag.front() == '/') {
            const std::string name = tag.substr(1);
            if (stack.empty() || stack.back() != name) return why = "mismatched </" + name + ">", false;
            stack.pop_back();
        } else if (tag.back() == '/') {
            if (stack.empty()) ++roots;
        } else {
            if (stack.empty()) ++roots;
            stack.push_back(name_of(tag));
        }
    }
    if (!stack.empty()) return why = "unclosed <" + stack.back() + ">", false;
    if (roots != 1) return why = "expected one root element", false;
    return true;
}

Json square_json() { return brep_to_json(corpus_square()); }

Json& curve_named(Json& j, const std::string& label) {
    for (auto& c : j["curves"])
        if (c["label"] == label) return c;
    throw std::runtime_error("no curve " + label);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("brep files round-trip byte-stably") {
    for (const auto& [name, b] : corpus()) {
        CAPTURE(name);
        const std::string first = dump(brep_to_json(b));
        const Brep back = brep_from_json(Json::parse(first));
        CHECK(dump(brep_to_json(back)) == first);
        CHECK(back.east.control_points() == b.east.control_points());
        CHECK(back.east.weights() == b.east.weights());
        CHECK(back.east.knots().values() == b.east.knots().values());
    }
    // A hand-written file normalizes once, then stays fixed.
    Json j = square_json();
    curve_named(j, "West")["knots"] = Json::parse("[0.0, 0.00, 1.000, 1]");
    const std::string once = dump(brep_to_json(brep_from_json(j)));
    CHECK(dump(brep_to_json(brep_from_json(Json::parse(once)))) == once);
}

TEST_CASE("files on disk") {
    const auto dir = std::filesystem::temp_directory_path() / "scmatch_io_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "annulus.json";
    const NurbsSurface s = k_refine(linear_only_pipeline(corpus_annulus()));
    write_json_file(path, surface_to_json(s));
    const Json j = read_json_file(path);
    const NurbsSurface t = surface_from_json(j);
    CHECK(t.control_net() == s.control_net());
    CHECK(t.weights() == s.weights());
    CHECK(t.knots_u().values() == s.knots_u().values());
    CHECK(t.knots_v().values() == s.knots_v().values());
    write_json_file(dir / "again.json", surface_to_json(t));
    std::ifstream a(path), b(dir / "again.json");
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
    CHECK(sa.back() == '\n');
    CHECK_THROWS_AS(read_json_file(dir / "missing.json"), InputError);
    write_text_file(dir / "bad.json", "{ not json");
    CHECK_THROWS_AS(read_json_file(dir / "bad.json"), InputError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("schema rejections") {
    {
        Json j = square_json();
        curve_named(j, "South")["knots"] = Json::parse("[0, 0, 0.7, 0.5, 1, 1]");
        curve_named(j, "South")["control_points"] = Json::parse("[[0,0],[0.3,0],[0.6,0],[1,0]]");
        CHECK_THROWS_AS(brep_from_json(j), InputError);
    }
    {
        Json j = square_json();
        curve_named(j, "North")["weights"] = Json::parse("[1, 0]");
        CHECK_THROWS_AS(brep_from_json(j), InputError);
        curve_named(j, "North")["weights"] = Json::parse("[1, -2]");
        CHECK_THROWS_AS(brep_from_json(j), InputError);
    }
    {
        Json j = square_json();
        curve_named(j, "East")["label"] = "West";
        CHECK_THROWS_WITH_AS(brep_from_json(j), doctest::Contains("West"), InputError);
    }
    {
        Json j = square_json();
        curve_named(j, "East")["control_points"] = Json::parse("[[1,0],[1,0.9]]");
        CHECK_THROWS_AS(brep_from_json(j), InputError);
    }
    {
        Json j = square_json();
        auto& curves = j["curves"];
        for (std::size_t k = 0; k < curves.size(); ++k)
            if (curves[k]["label"] == "East") {
                curves.erase(k);
                break;
            }
        CHECK_THROWS_WITH_AS(brep_from_json(j), doctest::Contains("East"), InputError);
    }
    {
        Json j = square_json();
        j["format"] = "something-else";
        CHECK_THROWS_AS(brep_from_json(j), InputError);
    }
    {
        Json j = surface_to_json(testutil::bilinear({0, 0}, {1, 0}, {0, 1}, {1, 1}));
        j["control_points"].erase(0);
        CHECK_THROWS_AS(surface_from_json(j), InputError);
    }
}

TEST_CASE("corpus is deterministic and valid") {
    const auto a = corpus(), b = corpus();
    const std::set<std::string> expected{"square", "rect5", "rect20", "annulus", "s_channel", "l_channel"};
    std::set<std::string> names;
    for (const auto& [name, brep] : a) {
        CAPTURE(name);
        names.insert(name);
        CHECK(dump(brep_to_json(brep)) == dump(brep_to_json(b.at(name))));
        CHECK_NOTHROW(brep_from_json(brep_to_json(brep)));
        CHECK(brep.closure_gap() <= 1e-8);
    }
    CHECK(names == expected);
    CHECK(quality_report(linear_only_pipeline(a.at("s_channel")), 101, 101).fold);
}

TEST_CASE("svg plots") {
    const NurbsSurface sq = testutil::bilinear({0, 0}, {1, 0}, {0, 1}, {1, 1});
    const std::string svg = plot_svg(sq);
    const std::regex fill("<polygon fill=\"(#[0-9a-f]{6})\"");
    int cells = 0;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), fill); it != std::sregex_iterator(); ++it) {
        ++cells;
        CHECK((*it)[1] == "#2166ac");
    }
    CHECK(cells == 100);
    CHECK(plot_svg(sq) == svg);

    PlotOptions none;
    none.metric = PlotMetric::None;
    CHECK(plot_svg(sq, none).find("<polygon") == std::string::npos);

    PlotOptions unif;
    unif.metric = PlotMetric::Uniformity;
    CHECK(plot_svg(sq, unif).find("#2166ac") != std::string::npos);

    const NurbsSurface s = linear_only_pipeline(match_boundaries(corpus_s_channel()).brep);
    std::string why;
    CHECK_MESSAGE(well_formed_xml(plot_svg(s), why), why);
    CHECK_MESSAGE(well_formed_xml(svg, why), why);
    CHECK(!well_formed_xml("<svg><g></svg>", why));

    PlotOptions bad;
    bad.iso = 1;
    CHECK_THROWS_AS(plot_svg(sq, bad), InputError);
    CHECK_THROWS_AS(plot_metric_from_string("area"), InputError);
}

TEST_CASE("strip_timings removes every seconds member") {
    const Json j = Json::parse(R"({"seconds": 1.5, "stages": [{"name": "a", "seconds": 0.1},
        {"name": "b", "inner": {"seconds": 2, "keep": 3}}], "value": 4})");
    const Json s = strip_timings(j);
    CHECK(s.dump() == R"({"stages":[{"name":"a"},{"name":"b","inner":{"keep":3}}],"value":4})");
}

TEST_CASE("match provenance serializes") {
    const MatchedBrep m = match_boundaries(corpus_rectangle(5.0, true));
    const Json p = provenance_to_json(m.provenance);
    CHECK(p.contains("sc_residual"));
    CHECK(p["sc_residual"].get<double>() == m.provenance.sc_residual);
    CHECK(p.dump().find("seconds") == std::string::npos);
}

}  // TEST_SUITE
