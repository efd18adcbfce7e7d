#include "cli.hpp"
#include "report.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

using namespace capcon::cli;

namespace {

struct Invocation {
    int code = -1;
    std::string out;
    std::string err;
};

Invocation run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "capcon");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    Invocation r;
    r.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        if (!line.empty() && line.back() == ',')
            cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

std::string data_file(const std::string& name)
{
    const char* dir = std::getenv("CAPCON_DATA_DIR");
    return std::string(dir ? dir : "data") + "/" + name;
}

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("capcon_test_" + name);
}

} // namespace

TEST(Cli, RequiresSubcommand) { EXPECT_EQ(run_cli({}).code, ConfigError); }

TEST(Cli, HelpExitsCleanly)
{
    const Invocation r = run_cli({"--help"});
    EXPECT_EQ(r.code, Success);
    EXPECT_NE(r.out.find("qcap-cond"), std::string::npos);
}

TEST(Cli, MalformedFlags)
{
    EXPECT_EQ(run_cli({"qcap-cond", "--bogus"}).code, ConfigError);
    EXPECT_EQ(run_cli({"qcap-cond", "--eps", "abc"}).code, ConfigError);
    EXPECT_EQ(run_cli({"qcap-cond", "--convention", "sideways"}).code, ConfigError);
    EXPECT_EQ(run_cli({"qcap-cond", "--format", "xml"}).code, ConfigError);
    EXPECT_EQ(run_cli({"nonsense"}).code, ConfigError);
}

TEST(Cli, InvalidSizes)
{
    const Invocation r = run_cli({"qcap-cond", "--sizes", "100"});
    EXPECT_EQ(r.code, ConfigError);
    EXPECT_NE(r.err.find("100"), std::string::npos);
    EXPECT_EQ(run_cli({"qcap-cond", "--n", "5"}).code, ConfigError);
}

TEST(Cli, QcapTableMatchesReference)
{
    const Invocation r = run_cli({"qcap-cond", "--sizes", "99,323", "--eps", "1e-3,1,1e3", "--compare",
                           data_file("qcap_cond.csv")});
    EXPECT_EQ(r.code, Success) << r.err;
    EXPECT_EQ(r.out.rfind("# qcap-cond", 0), 0u);
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 7u);
    EXPECT_EQ(rows[0][0], "size");
    EXPECT_EQ(rows[0][3], "kappa");
    EXPECT_EQ(rows[1][0], "99");
    EXPECT_EQ(rows[1][1], "9");
    EXPECT_NEAR(std::stod(rows[2][3]), 6.979, 6.979 * 0.01);
    EXPECT_NE(r.err.find("6 values checked, 0 outside"), std::string::npos) << r.err;
}

TEST(Cli, CompareFailureExitCode)
{
    const auto path = temp_file("bad_reference.csv");
    {
        std::ofstream f(path);
        f << "size,eps,kappa\n99,1,5.0\n";
    }
    const Invocation r = run_cli({"wcap-cond", "--sizes", "99", "--eps", "1", "--compare", path.string()});
    EXPECT_EQ(r.code, CompareFailed);
    EXPECT_NE(r.err.find("kappa"), std::string::npos);
    std::filesystem::remove(path);
    EXPECT_EQ(run_cli({"wcap-cond", "--sizes", "99", "--eps", "1", "--compare", path.string()}).code, ConfigError);
}

TEST(Cli, CompareReportsMissingRows)
{
    const auto path = temp_file("missing_reference.csv");
    {
        std::ofstream f(path);
        f << "size,eps,kappa\n4355,1,8.016\n";
    }
    EXPECT_EQ(run_cli({"qcap-cond", "--sizes", "99", "--eps", "1", "--compare", path.string()}).code, CompareFailed);
    std::filesystem::remove(path);
}

TEST(Cli, BabuskaReference)
{
    const Invocation r = run_cli({"babuska-cond", "--n", "8,16", "--compare", data_file("babuska_cond.csv")});
    EXPECT_EQ(r.code, Success) << r.err;
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1][2], "90");
    EXPECT_NEAR(std::stod(rows[1][6]), 5.622, 0.01);
}

TEST(Cli, OutputIsDeterministic)
{
    const std::vector<std::string> args = {"qcap-iters", "--sizes", "99,323", "--eps", "1e-2,1"};
    const Invocation a = run_cli(args), b = run_cli(args);
    EXPECT_EQ(a.code, Success);
    EXPECT_EQ(a.out, b.out);
    const Invocation c = run_cli({"qcap-iters", "--sizes", "99,323", "--eps", "1e-2,1", "--seed", "42"});
    EXPECT_EQ(a.out, c.out);
}

TEST(Cli, UnconvergedCellExitCode)
{
    const Invocation r = run_cli({"qcap-iters", "--sizes", "99", "--eps", "1", "--max-iter", "2"});
    EXPECT_EQ(r.code, NotConverged);
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][4], "0");
}

TEST(Cli, JsonSchema)
{
    const Invocation r = run_cli({"babuska-cond", "--n", "8", "--format", "json"});
    ASSERT_EQ(r.code, Success);
    const auto j = nlohmann::json::parse(r.out);
    ASSERT_TRUE(j.is_array());
    ASSERT_FALSE(j.empty());
    bool kappa = false;
    for (const auto& m : j) {
        for (const char* key : {"experiment", "geometry", "n", "n_Q", "eps", "metric", "value"})
            EXPECT_TRUE(m.contains(key)) << key;
        EXPECT_EQ(m["experiment"], "babuska-cond");
        if (m["metric"] == "kappa") {
            kappa = true;
            EXPECT_NEAR(m["value"].get<double>(), 5.622, 0.01);
        }
    }
    EXPECT_TRUE(kappa);
}

TEST(Cli, OutputFile)
{
    const auto path = temp_file("out.csv");
    const Invocation r = run_cli({"trace-constants", "--n", "2,4", "-o", path.string()});
    EXPECT_EQ(r.code, Success);
    EXPECT_TRUE(r.out.empty());
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    EXPECT_NE(ss.str().find("# c1="), std::string::npos);
    EXPECT_EQ(csv_rows(ss.str()).size(), 3u);
    std::filesystem::remove(path);
}

TEST(Cli, SchurSpectrumClusters)
{
    const Invocation r = run_cli({"schur-spectrum", "--n", "10", "--eps", "1"});
    ASSERT_EQ(r.code, Success);
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 4u);
    const double expect[] = {0.5 - 0.5 * std::sqrt(5.0), 1.0, 0.5 + 0.5 * std::sqrt(5.0)};
    long total = 0;
    for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(std::stod(rows[k + 1][3]), expect[k], 1e-5);
        EXPECT_LT(std::stod(rows[k + 1][5]), 1e-8);
        EXPECT_LE(std::stol(rows[k + 1][6]), 5);
        total += std::stol(rows[k + 1][4]);
    }
    EXPECT_EQ(total, 99);
}

TEST(Cli, ConvergenceRates)
{
    const Invocation r = run_cli({"convergence", "--levels", "5"});
    ASSERT_EQ(r.code, Success) << r.err;
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 6u);
    EXPECT_EQ(rows[0][4], "rate_u");
    EXPECT_TRUE(rows[1][4].empty());
    for (std::size_t k = 2; k < rows.size(); ++k) {
        EXPECT_NEAR(std::stod(rows[k][4]), 1.0, 0.05);
        EXPECT_NEAR(std::stod(rows[k][6]), 1.0, 0.05);
        EXPECT_LT(std::stod(rows[k][9]), 1e-8);
    }
}

TEST(Cli, LiteralConvention)
{
    const Invocation r = run_cli({"qcap-cond", "--sizes", "99", "--eps", "1", "--convention", "literal"});
    ASSERT_EQ(r.code, Success);
    const auto rows = csv_rows(r.out);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][6], "10");
    EXPECT_EQ(rows[1][8], "1");
}

TEST(Report, CellFormatting)
{
    EXPECT_EQ(format_cell(Cell{1.0 / 3.0}), "0.333333");
    EXPECT_EQ(format_cell(Cell{12345678.0}), "1.23457e+07");
    EXPECT_EQ(format_cell(Cell{std::numeric_limits<double>::quiet_NaN()}), "");
    EXPECT_EQ(format_cell(Cell{42LL}), "42");
    EXPECT_EQ(format_cell(Cell{std::string("x")}), "x");
}

TEST(Report, CsvLayout)
{
    Table t;
    t.title = "demo";
    t.columns = {"a", "b"};
    t.add({1LL, 0.5});
    t.notes = {"k=v"};
    std::ostringstream os;
    write_csv(os, t);
    EXPECT_EQ(os.str(), "# demo\na,b\n1,0.5\n# k=v\n");
    EXPECT_EQ(t.column("b"), 1u);
}

TEST(Report, CompareMatchesNumericKeys)
{
    Table t;
    t.columns = {"size", "eps", "kappa"};
    t.keys = {"size", "eps"};
    t.add({99LL, 0.001, 2.66});
    std::istringstream ok("size,eps,kappa\n99,1e-3,2.655\n");
    const CompareResult a = compare_csv(t, ok, 0.01);
    EXPECT_TRUE(a.ok());
    EXPECT_EQ(a.checked, 1u);
    std::istringstream bad("size,eps,kappa\n99,0.001,2.5\n");
    const CompareResult b = compare_csv(t, bad, 0.01);
    EXPECT_FALSE(b.ok());
    EXPECT_EQ(b.violations.size(), 1u);
}
