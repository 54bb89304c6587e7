#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dmlme/errors.hpp"
#include "dmlme/types.hpp"

using namespace dmlme;

namespace {

Group make_group(const std::string& id, int n, int d = 1, int v = 3, int q = 3) {
    Group g;
    g.id = id;
    g.y = Vector::LinSpaced(n, 0.0, 1.0);
    g.x = Matrix::Constant(n, d, 0.5);
    g.w = Matrix::Constant(n, v, -0.25);
    g.z = Matrix::Ones(n, q);
    return g;
}

GroupedDataset two_group_dataset() {
    GroupedDataset ds;
    ds.groups.push_back(make_group("a", 3));
    ds.groups.push_back(make_group("b", 3));
    return ds;
}

} // namespace

TEST_CASE("validate accepts a well-formed dataset and fills dimensions") {
    const GroupedDataset ds = validate_dataset(two_group_dataset());
    CHECK(ds.d == 1);
    CHECK(ds.v == 3);
    CHECK(ds.q == 3);
    CHECK(ds.n_total == 6);
    CHECK(ds.n_max == 3);
}

TEST_CASE("validate is idempotent") {
    const GroupedDataset once = validate_dataset(two_group_dataset());
    const GroupedDataset twice = validate_dataset(once);
    CHECK(twice.n_total == once.n_total);
    CHECK(twice.groups.size() == once.groups.size());
    for (std::size_t i = 0; i < once.groups.size(); ++i) {
        CHECK(twice.groups[i].id == once.groups[i].id);
        CHECK(twice.groups[i].y == once.groups[i].y);
        CHECK(twice.groups[i].x == once.groups[i].x);
        CHECK(twice.groups[i].w == once.groups[i].w);
        CHECK(twice.groups[i].z == once.groups[i].z);
    }
}

TEST_CASE("row-count mismatch is rejected naming the group") {
    GroupedDataset ds = two_group_dataset();
    ds.groups[1].x = Matrix::Constant(2, 1, 0.5); // y has 3 rows
    CHECK_THROWS_WITH_AS(validate_dataset(ds), doctest::Contains("group 'b'"), DataError);
}

TEST_CASE("single-group dataset is rejected") {
    GroupedDataset ds;
    ds.groups.push_back(make_group("solo", 4));
    CHECK_THROWS_AS(validate_dataset(ds), DataError);
}

TEST_CASE("non-finite entries are rejected with coordinates") {
    GroupedDataset ds = two_group_dataset();
    ds.groups[0].w(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(validate_dataset(ds), doctest::Contains("row 1, column 2"), DataError);
}

TEST_CASE("duplicate group ids are rejected") {
    GroupedDataset ds = two_group_dataset();
    ds.groups[1].id = "a";
    CHECK_THROWS_AS(validate_dataset(ds), DataError);
}

TEST_CASE("theta validation") {
    Theta t;
    t.beta = Vector::Zero(1);
    t.sigma2 = 1.0;
    t.sigma_mat = Matrix::Identity(2, 2);
    CHECK_NOTHROW(validate_theta(t));

    SUBCASE("negative sigma2") {
        t.sigma2 = 0.0;
        CHECK_THROWS_AS(validate_theta(t), DataError);
    }
    SUBCASE("asymmetric sigma_mat") {
        t.sigma_mat(0, 1) = 0.5;
        CHECK_THROWS_AS(validate_theta(t), DataError);
    }
    SUBCASE("eigenvalue below tolerance") {
        t.sigma_mat = -1e-6 * Matrix::Identity(2, 2);
        CHECK_THROWS_AS(validate_theta(t), DataError);
    }
    SUBCASE("boundary-grazing eigenvalue is clamped to PSD") {
        t.sigma_mat = -5e-11 * Matrix::Identity(2, 2);
        const Theta clamped = validate_theta(t);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(clamped.sigma_mat);
        CHECK(eig.eigenvalues().minCoeff() >= 0.0);
    }
}
