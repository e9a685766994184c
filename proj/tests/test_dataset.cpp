#include "elmer/dataset.hpp"
#include "elmer/error.hpp"
#include "elmer/rng.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace elmer;

namespace {

ColumnLayout simple_layout() {
    ColumnLayout l;
    l.exact_names = {"x2"};
    l.errorprone_names = {"w1"};
    return l;
}

const char* kSmallCsv =
    "subject,visit,y,x2,w1_r1,w1_r2\n"
    "a,2,1.5,0.1,1.0,1.2\n"
    "a,1,2.5,0.2,2.0,2.2\n"
    "b,1,3.5,0.3,3.0,3.2\n"
    "a,3,4.5,0.4,4.0,4.2\n"
    "b,2,5.5,0.5,5.0,5.2\n"
    "b,3,6.5,0.6,6.0,6.2\n";

double sample_skewness(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
        m2 += (x - mean) * (x - mean);
        m3 += (x - mean) * (x - mean) * (x - mean);
    }
    m2 /= static_cast<double>(v.size());
    m3 /= static_cast<double>(v.size());
    return m3 / std::pow(m2, 1.5);
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("small file maps to subjects, visits and replicates") {
    std::istringstream in(kSmallCsv);
    const auto ds = load_csv(in, simple_layout());
    CHECK(ds.n() == 2);
    CHECK(ds.K() == 2);
    CHECK(ds.p_err() == 1);
    CHECK(ds.p_exact() == 2);
    CHECK(ds.p() == 3);
    CHECK(ds.subject(0).subject_id == "a");
    CHECK(ds.subject(0).visits() == 3);
    // visits sorted by index
    CHECK(ds.subject(0).y(0) == 2.5);
    CHECK(ds.subject(0).y(1) == 1.5);
    CHECK(ds.subject(0).w_reps[1](2, 0) == doctest::Approx(4.2));
    const auto names = ds.coefficient_names();
    REQUIRE(names.size() == 3);
    CHECK(names[0] == "(Intercept)");
    CHECK(names[1] == "w1");
    CHECK(names[2] == "x2");
    // design = [1 | W(k) | x2]
    CHECK(ds.design(1, 1)(0, 0) == 1.0);
    CHECK(ds.design(1, 1)(0, 1) == doctest::Approx(3.2));
    CHECK(ds.design(1, 1)(0, 2) == doctest::Approx(0.3));
    CHECK(ds.mean_design(1)(0, 1) == doctest::Approx(3.1));
}

TEST_CASE("byte order mark on the header is ignored") {
    std::istringstream in(std::string("\xEF\xBB\xBF") + kSmallCsv);
    CHECK(load_csv(in, simple_layout()).n() == 2);
}

TEST_CASE("missing replicate cell names the subject") {
    std::istringstream in(
        "subject,visit,y,x2,w1_r1,w1_r2\n"
        "7,1,1,0,1,1\n"
        "7,2,1,0,1,\n");
    try {
        load_csv(in, simple_layout());
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("subject 7") != std::string::npos);
    }
}

TEST_CASE("missing column is a schema error naming the column") {
    std::istringstream in("subject,visit,y,w1_r1,w1_r2\n1,1,1,1,1\n");
    try {
        load_csv(in, simple_layout());
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("x2") != std::string::npos);
    }
    std::istringstream one_rep("subject,visit,y,x2,w1_r1\n1,1,1,1,1\n");
    CHECK_THROWS_AS(load_csv(one_rep, simple_layout()), SchemaError);
}

TEST_CASE("non-finite value is a parse error with the row number") {
    std::istringstream in(
        "subject,visit,y,x2,w1_r1,w1_r2\n"
        "1,1,1,0,1,1\n"
        "1,2,nan,0,1,1\n");
    try {
        load_csv(in, simple_layout());
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
}

TEST_CASE("duplicate visit and unknown layout key are rejected") {
    std::istringstream dup("subject,visit,y,x2,w1_r1,w1_r2\n1,1,1,0,1,1\n1,1,2,0,1,1\n");
    CHECK_THROWS_AS(load_csv(dup, simple_layout()), ValidationError);
    std::istringstream layout("exact = a\nerrorprone = b\ncolour = red\n");
    CHECK_THROWS_AS(parse_layout(layout), ValidationError);
}

TEST_CASE("layout file shaped like the cohort study") {
    std::istringstream layout(
        "id = subject\nvisit = visit\nresponse = y\n"
        "errorprone = SBP, DBP\n"
        "exact = age, gender, race, education, group, t1, t2, group_t1, group_t2\n"
        "intercept = false\n");
    const auto l = parse_layout(layout);
    std::ostringstream csv;
    csv << "subject,visit,y,SBP_r1,SBP_r2,DBP_r1,DBP_r2,age,gender,race,education,group,t1,t2,group_t1,group_t2\n";
    for (int i = 0; i < 3; ++i)
        for (int t = 0; t < 3; ++t)
            csv << i << ',' << t << ",0.5,1,2,3,4,5,6,7,8,9," << (t == 1) << ',' << (t == 2) << ",0,0\n";
    std::istringstream in(csv.str());
    const auto ds = load_csv(in, l);
    CHECK(ds.p_err() == 2);
    CHECK(ds.K() == 2);
    CHECK(ds.p_exact() == 9);
    CHECK(ds.p() == 11);
    CHECK(ds.coefficient_names().front() == "SBP");
}

TEST_CASE("write then load reproduces the numbers") {
    const auto ds = test_support::random_dataset(6, 3, 4, 11, {}, 2, 2, true);
    std::stringstream buf;
    write_csv(buf, ds);
    const auto back = load_csv(buf, ds.layout());
    REQUIRE(back.n() == ds.n());
    for (int i = 0; i < ds.n(); ++i) {
        CHECK((back.subject(i).y - ds.subject(i).y).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((back.subject(i).x_exact - ds.subject(i).x_exact).cwiseAbs().maxCoeff() <= 1e-12);
        for (int k = 0; k < ds.K(); ++k)
            CHECK((back.subject(i).w_reps[k] - ds.subject(i).w_reps[k]).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("centering") {
    std::istringstream in(
        "subject,visit,y,x2,w1_r1,w1_r2\n"
        "1,1,1,1,10,8\n"
        "1,2,2,2,4,6\n"
        "2,1,3,3,1,7\n");
    const auto ds = load_csv(in, simple_layout());
    const auto c = center_columns(ds, {"x2", "w1", "y"});
    CHECK(c.subject(0).x_exact(0, 1) == doctest::Approx(-1.0));
    CHECK(c.subject(0).x_exact(1, 1) == doctest::Approx(0.0));
    CHECK(c.subject(1).x_exact(0, 1) == doctest::Approx(1.0));
    CHECK(c.subject(0).x_exact(0, 0) == 1.0);  // intercept untouched
    // pooled mean of both replicate columns is 36/6 = 6
    double pooled = 0.0;
    for (const auto& s : c.subjects())
        for (const auto& w : s.w_reps) pooled += w.sum();
    CHECK(std::abs(pooled) < 1e-12);
    CHECK(c.subject(0).w_reps[0](0, 0) == doctest::Approx(4.0));
    const auto twice = center_columns(c, {"x2", "w1", "y"});
    for (int i = 0; i < c.n(); ++i) {
        CHECK((twice.subject(i).y - c.subject(i).y).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((twice.subject(i).w_reps[1] - c.subject(i).w_reps[1]).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK_THROWS_AS(center_columns(ds, {"nope"}), ValidationError);
}

TEST_CASE("replicate-centered differences") {
    std::istringstream in(
        "subject,visit,y,x2,w1_r1,w1_r2\n"
        "1,1,1,1,10,8\n");
    const auto ds = load_csv(in, simple_layout());
    CHECK(replicate_centered_difference(ds, "w1", 1)[0] == doctest::Approx(1.0));
    CHECK(replicate_centered_difference(ds, "w1", 2)[0] == doctest::Approx(-1.0));
    CHECK_THROWS_AS(replicate_centered_difference(ds, "x2", 1), ValidationError);
    CHECK_THROWS_AS(replicate_centered_difference(ds, "w1", 3), ValidationError);

    std::istringstream in3("subject,visit,y,x2,w1_r1,w1_r2,w1_r3\n1,1,1,1,4,4,4\n");
    const auto ds3 = load_csv(in3, simple_layout());
    for (int k = 1; k <= 3; ++k) CHECK(replicate_centered_difference(ds3, "w1", k)[0] == 0.0);

    const auto r = test_support::random_dataset(20, 3, 3, 5, {0.5, 1.0, 2.0});
    const auto d1 = replicate_centered_difference(r, "w1", 1);
    const auto d2 = replicate_centered_difference(r, "w1", 2);
    const auto d3 = replicate_centered_difference(r, "w1", 3);
    for (std::size_t t = 0; t < d1.size(); ++t) CHECK(std::abs(d1[t] + d2[t] + d3[t]) < 1e-12);
}

TEST_CASE("symmetric replicate errors give near-zero skewness of the differences") {
    const auto ds = test_support::random_dataset(25000, 2, 4, 99, {1.0, 1.0});
    const auto d = replicate_centered_difference(ds, "w1", 1);
    CHECK(d.size() == 100000);
    CHECK(std::abs(sample_skewness(d)) < 0.02);
}

TEST_CASE("skewness test against reference values") {
    // scipy.stats.skewtest on the same samples
    const std::vector<double> a{0.3, -1.2, 2.5, 0.7, -0.4, 1.9, 3.3, -0.8, 0.1, 0.05, 4.2, -1.5};
    auto ra = dagostino_skewness_test(a);
    CHECK(ra.z_statistic == doctest::Approx(1.1185688226045243).epsilon(1e-10));
    CHECK(ra.p_value == doctest::Approx(0.26332413042497593).epsilon(1e-9));
    std::vector<double> b;
    for (int v = 1; v <= 20; ++v) b.push_back(v);
    b.push_back(50);
    auto rb = dagostino_skewness_test(b);
    CHECK(rb.z_statistic == doctest::Approx(3.8929660179343415).epsilon(1e-10));
    CHECK(rb.p_value == doctest::Approx(9.902602803816983e-05).epsilon(1e-8));
    CHECK(rb.n_obs == 21);

    std::vector<double> sym;
    for (int r = 0; r < 20; ++r)
        for (double v : {-2.0, -1.0, 0.0, 1.0, 2.0}) sym.push_back(v);
    auto rs = dagostino_skewness_test(sym);
    CHECK(std::abs(rs.z_statistic) < 1e-12);
    CHECK(rs.p_value > 0.9);

    CHECK_THROWS_AS(dagostino_skewness_test(std::vector<double>(8, 1.0)), SampleSizeError);
}

TEST_CASE("skewness test detects exponential errors and holds its level under normality") {
    rng::Stream s(2024);
    std::vector<double> e(10000);
    for (auto& v : e) v = s.exponential(2.0) - 0.5;
    CHECK(dagostino_skewness_test(e).p_value < 1e-6);

    int rejections = 0;
    std::vector<double> z(10000);
    for (int rep = 0; rep < 1000; ++rep) {
        for (auto& v : z) v = s.normal();
        rejections += dagostino_skewness_test(z).p_value < 0.05 ? 1 : 0;
    }
    CHECK(rejections >= 35);
    CHECK(rejections <= 65);
}

TEST_CASE("skewness table covers every coordinate and replicate") {
    const auto ds = test_support::random_dataset(10, 3, 2, 3, {}, 2);
    const auto t = skewness_table(ds);
    REQUIRE(t.size() == 6);
    CHECK(t[0].coordinate == "w1");
    CHECK(t[0].replicate == 1);
    CHECK(t[0].test.coordinate == "w1_r1");
    CHECK(t[5].coordinate == "w2");
    CHECK(t[5].replicate == 3);
    for (const auto& r : t) {
        CHECK(r.test.n_obs == 20);
        CHECK(r.test.p_value >= 0.0);
        CHECK(r.test.p_value <= 1.0);
    }
}

}  // TEST_SUITE
