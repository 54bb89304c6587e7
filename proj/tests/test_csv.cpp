#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dmlme/csv.hpp"
#include "dmlme/errors.hpp"
#include "dmlme/simgen.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace dmlme;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

CsvSchema small_schema() {
    return CsvSchema{"id", "resp", {"x"}, {"w"}, {"z"}};
}

} // namespace

TEST_CASE("load groups rows by id in first-appearance order") {
    TempFile file("dmlme_small.csv");
    write_text(file.path,
               "id,resp,x,w,z\n"
               "a,1.0,0.1,0.5,1\n"
               "a,2.0,0.2,0.6,1\n"
               "b,3.0,0.3,0.7,1\n"
               "b,4.0,0.4,0.8,1\n");
    const GroupedDataset ds = load_csv(file.path, small_schema());
    CHECK(ds.n_groups() == 2);
    CHECK(ds.groups[0].id == "a");
    CHECK(ds.groups[1].id == "b");
    CHECK(ds.groups[0].rows() == 2);
    CHECK(ds.groups[0].y(1) == 2.0);
    CHECK(ds.groups[1].x(0, 0) == 0.3);
    CHECK(ds.d == 1);
    CHECK(ds.v == 1);
    CHECK(ds.q == 1);
}

TEST_CASE("interleaved group rows keep within-group file order") {
    TempFile file("dmlme_interleaved.csv");
    write_text(file.path,
               "id,resp,x,w,z\n"
               "a,1,0,0,1\n"
               "b,2,0,0,1\n"
               "a,3,0,0,1\n"
               "b,4,0,0,1\n");
    const GroupedDataset ds = load_csv(file.path, small_schema());
    CHECK(ds.groups[0].y(0) == 1.0);
    CHECK(ds.groups[0].y(1) == 3.0);
    CHECK(ds.groups[1].y(0) == 2.0);
    CHECK(ds.groups[1].y(1) == 4.0);
}

TEST_CASE("RFC-4180 quoting: embedded commas, quotes, and CRLF") {
    TempFile file("dmlme_quoted.csv");
    write_text(file.path,
               "id,resp,x,w,z\r\n"
               "\"unit, one\",1,0,0,1\r\n"
               "\"unit, one\",2,0,0,1\r\n"
               "\"he said \"\"hi\"\"\",3,0,0,1\r\n"
               "\"he said \"\"hi\"\"\",4,0,0,1\r\n");
    const GroupedDataset ds = load_csv(file.path, small_schema());
    CHECK(ds.groups[0].id == "unit, one");
    CHECK(ds.groups[1].id == "he said \"hi\"");
}

TEST_CASE("parse errors carry line numbers and column names") {
    TempFile file("dmlme_bad.csv");
    write_text(file.path,
               "id,resp,x,w,z\n"
               "a,1,0,0,1\n"
               "a,oops,0,0,1\n"
               "b,2,0,0,1\n");
    CHECK_THROWS_WITH_AS(load_csv(file.path, small_schema()),
                         doctest::Contains("line 3"), DataError);
}

TEST_CASE("unknown schema column errors") {
    TempFile file("dmlme_missing.csv");
    write_text(file.path,
               "id,resp,x,w\n"
               "a,1,0,0\n"
               "b,2,0,0\n");
    CHECK_THROWS_WITH_AS(load_csv(file.path, small_schema()),
                         doctest::Contains("unknown column 'z'"), DataError);
}

TEST_CASE("field-count mismatch errors") {
    TempFile file("dmlme_ragged.csv");
    write_text(file.path,
               "id,resp,x,w,z\n"
               "a,1,0,0,1\n"
               "a,1,0,0\n");
    CHECK_THROWS_WITH_AS(load_csv(file.path, small_schema()),
                         doctest::Contains("line 3"), DataError);
}

TEST_CASE("missing file and empty file error") {
    CHECK_THROWS_AS(load_csv("/nonexistent/definitely_missing.csv", small_schema()), DataError);
    TempFile file("dmlme_empty.csv");
    write_text(file.path, "");
    CHECK_THROWS_AS(load_csv(file.path, small_schema()), DataError);
}

TEST_CASE("schema requires disjoint column names") {
    CsvSchema schema{"id", "id", {"x"}, {"w"}, {"z"}};
    TempFile file("dmlme_any.csv");
    write_text(file.path, "id,x,w,z\n");
    CHECK_THROWS_AS(load_csv(file.path, schema), DataError);
}

TEST_CASE("write/read round trip preserves every value bit-exactly") {
    SimScenario scenario;
    scenario.n_groups = 15;
    const GroupedDataset original = gen_dataset(scenario, Rng(31));
    const CsvSchema schema{"group", "y", {"x1"}, {"w1", "w2", "w3"}, {"z1", "z2", "z3"}};

    TempFile file("dmlme_roundtrip.csv");
    write_csv(file.path, original, schema);
    const GroupedDataset loaded = load_csv(file.path, schema);

    REQUIRE(loaded.groups.size() == original.groups.size());
    for (std::size_t g = 0; g < original.groups.size(); ++g) {
        CHECK(loaded.groups[g].id == original.groups[g].id);
        CHECK(loaded.groups[g].y == original.groups[g].y);
        CHECK(loaded.groups[g].x == original.groups[g].x);
        CHECK(loaded.groups[g].w == original.groups[g].w);
        CHECK(loaded.groups[g].z == original.groups[g].z);
    }
}

TEST_CASE("round trip survives extreme finite doubles") {
    GroupedDataset ds;
    for (int g = 0; g < 2; ++g) {
        Group grp;
        grp.id = "g" + std::to_string(g);
        grp.y = Vector::Constant(2, 0.1 + g);
        grp.x = Matrix::Constant(2, 1, g == 0 ? 1e-308 : 1.7976931348623157e308);
        grp.w = Matrix::Constant(2, 1, -2.2250738585072014e-308);
        grp.z = Matrix::Constant(2, 1, 0.30000000000000004);
        ds.groups.push_back(std::move(grp));
    }
    const CsvSchema schema = CsvSchema{"group", "y", {"x"}, {"w"}, {"z"}};
    TempFile file("dmlme_extreme.csv");
    write_csv(file.path, validate_dataset(ds), schema);
    const GroupedDataset loaded = load_csv(file.path, schema);
    for (std::size_t g = 0; g < 2; ++g) {
        CHECK(loaded.groups[g].x == ds.groups[g].x);
        CHECK(loaded.groups[g].w == ds.groups[g].w);
        CHECK(loaded.groups[g].z == ds.groups[g].z);
    }
}
