#include <gtest/gtest.h>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "isq/io.hpp"

using namespace isq;

TEST(Csv, DoublesRoundTripAtSeventeenDigits) {
  boost::random::mt19937 rng(7);
  boost::random::uniform_real_distribution<double> u(-300.0, 300.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::pow(10.0, u(rng)) * (i % 2 ? -1.0 : 1.0);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(-INFINITY), "-inf");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(Csv, WriteReadRoundTrip) {
  CsvTable t;
  t.name = "demo";
  t.columns = {"x", "label", "n"};
  t.note("alpha", -0.1875);
  t.note("comment", "has, a comma");
  t.add_row({1.5, "plain", 3});
  t.add_row({-2e-300, "quoted \"x\", y", 4});
  EXPECT_THROW(t.add_row({1.0}), DomainError);
  std::istringstream is(to_csv_string(t));
  const auto back = read_csv(is);
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(provenance_value(back, "alpha"), "-0.1875");
  EXPECT_EQ(provenance_value(back, "comment"), "has, a comma");
  EXPECT_EQ(provenance_value(back, "missing"), "");
}

TEST(Csv, HeaderCarriesVersion) {
  CsvTable t;
  t.columns = {"a"};
  EXPECT_EQ(to_csv_string(t).rfind(std::string("# isqlab ") + kCodeVersion, 0), 0u);
}

TEST(Files, AtomicWriteCreatesDirectoriesAndLeavesNoTemporary) {
  const auto dir = std::filesystem::temp_directory_path() / "isq_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_file_atomic(dir / "a.txt", "hello\n");
  EXPECT_EQ(read_file(dir / "a.txt"), "hello\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "a.txt.tmp"));
  EXPECT_THROW(read_file(dir / "absent.txt"), IoError);
  EXPECT_THROW(write_file_atomic("/proc/isq_no_such_dir/x.txt", "x"), IoError);
  std::filesystem::remove_all(dir.parent_path());
}

TEST(JsonModel, ParamsFromAlpha) {
  const auto p = params_from_json(Json{{"alpha", -0.1875}});
  EXPECT_DOUBLE_EQ(p.omega, 0.25);
  EXPECT_DOUBLE_EQ(p.x0, 1.0);
  const auto q = params_from_json(to_json(derived_constants(-0.24, 2.0)));
  EXPECT_DOUBLE_EQ(q.nu_plus, 0.6);
  EXPECT_DOUBLE_EQ(q.x0, 2.0);
  EXPECT_EQ(params_from_json(Json{{"alpha", -0.3}}).mode, Mode::kLimitCycle);
}

TEST(JsonModel, ParamsRejectBadInput) {
  EXPECT_THROW(params_from_json(Json{{"alpha", -0.1875}, {"beta", 1}}), ValidationError);
  EXPECT_THROW(params_from_json(Json{{"x0", 1.0}}), ValidationError);
  EXPECT_THROW(params_from_json(Json{{"alpha", "small"}}), ValidationError);
  EXPECT_THROW(params_from_json(Json{{"alpha", -0.25}}), ValidationError);
  EXPECT_THROW(params_from_json(Json{{"alpha", 0.1}}), ValidationError);
  EXPECT_THROW(params_from_json(Json{{"alpha", -0.1875}, {"omega", 0.3}}), ValidationError);
  EXPECT_THROW(params_from_json(Json{{"alpha", -0.1875}, {"mode", "limit-cycle"}}), ValidationError);
  EXPECT_THROW(params_from_json(Json::array()), ValidationError);
}

TEST(JsonModel, RegulatorRoundTrip) {
  for (const auto& r : {Regulator::square(0.01, 1.5), Regulator::linear(2.0),
                        Regulator::generic(0.5, 3.0, TabulatedProfile({0.0, 0.5, 1.0}, {1.0, 0.5, 0.0}))}) {
    const auto back = regulator_from_json(to_json(r));
    EXPECT_EQ(back.kind, r.kind);
    EXPECT_EQ(back.b, r.b);
    EXPECT_EQ(back.g, r.g);
    EXPECT_EQ(back.table.values(), r.table.values());
  }
  const auto d = regulator_from_json(Json::object());
  EXPECT_EQ(d.kind, RegulatorKind::kSquareWell);
  EXPECT_EQ(d.b, 1.0);
}

TEST(JsonModel, RegulatorRejectsBadInput) {
  EXPECT_THROW(regulator_from_json(Json{{"kind", "cubic"}}), ValidationError);
  EXPECT_THROW(regulator_from_json(Json{{"b", -1.0}}), ValidationError);
  EXPECT_THROW(regulator_from_json(Json{{"g", -1.0}}), ValidationError);
  EXPECT_THROW(regulator_from_json(Json{{"kind", "linear"}, {"b", 0.5}}), ValidationError);
  EXPECT_THROW(regulator_from_json(Json{{"kind", "generic"}}), ValidationError);
  EXPECT_THROW(regulator_from_json(Json{{"depth", 1.0}}), ValidationError);
  EXPECT_THROW(regulator_from_json(Json{{"profile", {{"s", {0.0, 1.0}}, {"f", {1.0, 1.0}}}}}), ValidationError);
  EXPECT_THROW(regulator_from_json(Json{{"kind", "generic"}, {"profile", {{"s", {0.0, 1.0}}}}}), ValidationError);
  EXPECT_THROW(
      regulator_from_json(Json{{"kind", "generic"}, {"profile", {{"s", {0.0, 0.7}}, {"f", {1.0, 1.0}}}}}),
      ValidationError);
}

TEST(RunSpecJson, ParsesAndRoundTrips) {
  const auto s = run_spec_from_text(R"({"command": "bound-state", "params": {"alpha": -0.1875},
      "regulator": {"kind": "square", "b": 1, "g": 2.0}, "options": {"g_values": [2.0, 2.1]}, "output": "out"})");
  EXPECT_EQ(s.command, "bound-state");
  EXPECT_EQ(s.regulator.g, 2.0);
  EXPECT_EQ(s.output, "out");
  const auto back = run_spec_from_json(to_json(s));
  EXPECT_EQ(back.command, s.command);
  EXPECT_EQ(back.options, s.options);
  EXPECT_EQ(back.params.alpha, s.params.alpha);
}

TEST(RunSpecJson, RejectsMalformedSpecs) {
  EXPECT_THROW(run_spec_from_text("{not json"), ValidationError);
  EXPECT_THROW(run_spec_from_text(R"({"params": {"alpha": -0.1875}})"), ValidationError);
  EXPECT_THROW(run_spec_from_text(R"({"command": "dance", "params": {"alpha": -0.1875}})"), ValidationError);
  EXPECT_THROW(run_spec_from_text(R"({"command": "flow"})"), ValidationError);
  EXPECT_THROW(run_spec_from_text(R"({"command": "flow", "params": {"alpha": -0.1875}, "seed": 3})"),
               ValidationError);
  EXPECT_THROW(run_spec_from_text(R"({"command": "flow", "params": {"alpha": -0.1875}, "options": [1]})"),
               ValidationError);
  EXPECT_THROW(run_spec_from_text(R"({"command": "flow", "params": {"alpha": -0.1875}, "output": 3})"),
               ValidationError);
}
