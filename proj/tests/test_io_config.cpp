#include <gtest/gtest.h>

#include <sstream>

#include "hkb/config.hpp"
#include "hkb/io.hpp"

using namespace hkb;

namespace {

OperatorConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

const char* kGeneral = R"(# sheared example
N = 1
A.row.1 = 1.2, 0.3
A.row.2 = 0.3, 0.8   # symmetric
v.d = 0.5
v.c = 1
t.list = 0.5, 1, 2
sources = 0, 0.5; 0.25, 1
seed = 42
tolerance.mass = 1e-3
)";

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string l;
    while (std::getline(in, l)) out.push_back(l);
    return out;
}

} // namespace

TEST(Config, ParsesFullExample) {
    const OperatorConfig cfg = parse(kGeneral);
    EXPECT_EQ(cfg.spec.N, 1);
    EXPECT_DOUBLE_EQ(cfg.spec.A(0, 1), 0.3);
    EXPECT_DOUBLE_EQ(cfg.spec.A(1, 1), 0.8);
    EXPECT_DOUBLE_EQ(cfg.spec.d(0), 0.5);
    EXPECT_DOUBLE_EQ(cfg.spec.c, 1.0);
    ASSERT_EQ(cfg.times.size(), 3u);
    EXPECT_DOUBLE_EQ(cfg.times[2], 2.0);
    ASSERT_EQ(cfg.sources.size(), 2u);
    EXPECT_DOUBLE_EQ(cfg.sources[1].x(0), 0.25);
    EXPECT_DOUBLE_EQ(cfg.sources[1].y, 1.0);
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_DOUBLE_EQ(cfg.tolerance("mass", 1.0), 1e-3);
    EXPECT_DOUBLE_EQ(cfg.tolerance("other", 7.0), 7.0);
}

TEST(Config, DefaultsForOptionalKeys) {
    const OperatorConfig cfg = parse("N = 2\nA.row.1 = 1,0,0\nA.row.2 = 0,1,0\nA.row.3 = 0,0,1\n");
    EXPECT_EQ(cfg.spec.d.size(), 2);
    EXPECT_DOUBLE_EQ(cfg.spec.d.norm(), 0.0);
    EXPECT_DOUBLE_EQ(cfg.spec.c, 0.0);
    EXPECT_TRUE(cfg.times.empty());
    EXPECT_FALSE(cfg.nx.has_value());
}

TEST(Config, RejectsMalformedInput) {
    const std::string head = "N = 1\nA.row.1 = 1, 0\nA.row.2 = 0, 1\n";
    EXPECT_THROW(parse("A.row.1 = 1, 0\nA.row.2 = 0, 1\n"), ConfigError);          // missing N
    EXPECT_THROW(parse("N = 0\n"), ConfigError);
    EXPECT_THROW(parse("N = 1.5\n"), ConfigError);
    EXPECT_THROW(parse("N = 1\nA.row.1 = 1, 0, 0\nA.row.2 = 0, 1\n"), ConfigError);  // malformed row
    EXPECT_THROW(parse("N = 1\nA.row.1 = 1, 0\n"), ConfigError);                     // missing row
    EXPECT_THROW(parse(head + "bogus = 1\n"), ConfigError);                          // unknown key
    EXPECT_THROW(parse(head + "v.c = 1\nv.c = 2\n"), ConfigError);                   // duplicate key
    EXPECT_THROW(parse(head + "v.c = one\n"), ConfigError);
    EXPECT_THROW(parse(head + "v.c = 1x\n"), ConfigError);
    EXPECT_THROW(parse(head + "v.d = 1, 2\n"), ConfigError);
    EXPECT_THROW(parse(head + "sources = 0\n"), ConfigError);                        // bad source
    EXPECT_THROW(parse(head + "sources = 0, -1\n"), ConfigError);                    // y <= 0
    EXPECT_THROW(parse(head + "t.list = 1, 0\n"), ConfigError);
    EXPECT_THROW(parse(head + "tolerance.mass = -1\n"), ConfigError);
    EXPECT_THROW(parse(head + "just text\n"), ConfigError);
    EXPECT_THROW(parse(head + " = 3\n"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/path.cfg"), ConfigError);
}

TEST(Config, GridDefaultsCoverTimesAndSources) {
    const OperatorConfig cfg = parse(kGeneral);
    const GridSpec g = config_grid(cfg, cfg.spec.c);
    EXPECT_NEAR(g.Rx, 6.0 * std::sqrt(2.0) + 0.25 + 1.0, 1e-14);
    EXPECT_NEAR(g.Ry, 6.0 * std::sqrt(2.0) + 1.0 + 1.0, 1e-14);
    EXPECT_EQ(g.nx, 128);
    EXPECT_EQ(g.ny, 128);
    EXPECT_DOUBLE_EQ(g.c, 1.0);
}

TEST(Config, ExplicitGridAndValidation) {
    OperatorConfig cfg = parse(std::string(kGeneral) + "grid.Rx = 5\ngrid.nx = 64\n");
    const GridSpec g = config_grid(cfg, 1.0);
    EXPECT_DOUBLE_EQ(g.Rx, 5.0);
    EXPECT_EQ(g.nx, 64);
    cfg.nx = 4;
    EXPECT_THROW(config_grid(cfg, 1.0), ConfigError);
}

TEST(Csv, SliceHeaderAndFullPrecision) {
    KernelSlice s;
    s.t = 0.1;
    s.source = Point::planar(0.0, 1.0 / 3.0);
    s.c = 1.0;
    s.samples.push_back({Point::planar(0.1, 0.7), 1.0 / 7.0});
    std::ostringstream out;
    write_slice_csv(out, s);
    const auto ls = lines(out.str());
    ASSERT_EQ(ls.size(), 2u);
    EXPECT_EQ(ls[0], "t,x1,y1,x2,y2,p,convention");
    std::vector<std::string> cells;
    std::istringstream row(ls[1]);
    for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 7u);
    // 17 significant digits round-trip every double
    EXPECT_EQ(std::stod(cells[0]), 0.1);
    EXPECT_EQ(std::stod(cells[4]), 1.0 / 3.0);
    EXPECT_EQ(std::stod(cells[5]), 1.0 / 7.0);
    EXPECT_EQ(cells[6], "y^c");
    std::ostringstream leb;
    write_slice_csv(leb, to_lebesgue(s));
    const std::string lrow = lines(leb.str())[1];
    EXPECT_EQ(lrow.substr(lrow.rfind(',') + 1), "lebesgue");
}

TEST(Csv, RejectsHigherDimensionalSlices) {
    KernelSlice s;
    s.source = Point(Eigen::VectorXd::Zero(2), 1.0);
    s.samples.push_back({Point(Eigen::VectorXd::Zero(2), 1.0), 1.0});
    std::ostringstream out;
    EXPECT_THROW(write_slice_csv(out, s), StructuralError);
}

TEST(Csv, FieldAndEnvelopeHeaders) {
    GridSpec g{8.0, 8.0, 8, 8, 0.0};
    std::ostringstream f;
    write_field_csv(f, Field(g, 2.0));
    const auto fl = lines(f.str());
    EXPECT_EQ(fl[0], "x,y,value");
    EXPECT_EQ(fl.size(), 65u);
    std::ostringstream e;
    write_envelope_csv(e, {{1.0, Point::planar(0.0, 1.0), Point::planar(1.0, 2.0), 0.5, EnvelopeForm::one_sided_2,
                            EnvelopeSide::lower}});
    const auto el = lines(e.str());
    EXPECT_EQ(el[0], "t,x1,y1,x2,y2,envelope,form,side");
    EXPECT_NE(el[1].find("one-sided-2,lower"), std::string::npos);
}

TEST(Json, SliceMetadata) {
    KernelSlice s;
    s.t = 2.0;
    s.source = Point::planar(0.5, 1.5);
    s.c = -0.5;
    s.method = "exact";
    s.samples.resize(3);
    const json j = slice_meta(s);
    EXPECT_EQ(j["schema_version"], schema_version);
    EXPECT_EQ(j["method"], "exact");
    EXPECT_EQ(j["samples"], 3);
    EXPECT_EQ(j["convention"], "y^c");
    EXPECT_DOUBLE_EQ(j["source"]["y"].get<double>(), 1.5);
    const json gj = grid_json(GridSpec{8.0, 6.0, 32, 16, 1.0});
    EXPECT_EQ(gj["ny"], 16);
}
