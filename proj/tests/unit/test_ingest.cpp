#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace perfcast;
using testing_support::fixture;

namespace {

const char* kHeader =
    "record_id,suite,date,vendor,system,processor,cores,freq_mhz,l3_kb,threads_per_core,auto_parallel,transistors,"
    "score_speed,score_rate\n";

std::vector<BenchmarkRecord> parse_text(const std::string& systems, const std::string& micros = {}) {
    std::istringstream s(systems), m(micros);
    return parse_records(s, micros.empty() ? nullptr : &m);
}

}  // namespace

TEST(MonthIndex, OriginAndOneYear) {
    EXPECT_EQ(MonthIndex::parse("1995-08").value, 0);
    EXPECT_EQ(MonthIndex::parse("1996-08").value, 12);
    EXPECT_EQ(MonthIndex::parse("2017-03-15").value, MonthIndex::parse("2017-03").value);
}

TEST(MonthIndex, RoundTripThrough2100) {
    for (int v = 0; v <= MonthIndex::from_year_month(2100, 12).value; ++v) {
        MonthIndex m(v);
        ASSERT_EQ(MonthIndex::parse(m.str()).value, v) << m.str();
    }
}

TEST(MonthIndex, RejectsBadText) {
    EXPECT_THROW(MonthIndex::parse("1995-07"), ParseError);
    EXPECT_THROW(MonthIndex::parse("2001-13"), ParseError);
    EXPECT_THROW(MonthIndex::parse("2001/03"), ParseError);
    EXPECT_THROW(MonthIndex::parse("01-03"), ParseError);
}

TEST(ParseRecords, FixtureCounts) {
    auto recs = testing_support::load_fixture_records();
    ASSERT_EQ(recs.size(), 40u);
    std::map<Suite, int> counts;
    for (const auto& r : recs) ++counts[r.suite];
    for (Suite s : kAllSuites) EXPECT_EQ(counts[s], 10);
    // micro ratios joined onto every record
    for (const auto& r : recs) EXPECT_EQ(r.micros.size(), builtin_suites().at(r.suite).p()) << r.record_id;
}

TEST(ParseRecords, MissingFieldsStayAbsent) {
    auto recs = testing_support::load_fixture_records(false);
    EXPECT_FALSE(recs[0].hw.l3_kb.has_value());
    EXPECT_FALSE(recs[0].hw.transistors.has_value());
    EXPECT_EQ(recs[0].date.str(), "1995-12");
}

TEST(ParseRecords, MalformedRowNamesLineAndColumn) {
    std::string text = std::string(kHeader) + "a,2017,2018-01,V,S,P,4,3000,8192,2,1,,10,\n" +
                       "b,2017,2018-02,V,S,P,four,3000,8192,2,1,,10,\n";
    try {
        parse_text(text);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_EQ(e.column(), "cores");
    }
}

TEST(ParseRecords, NonPositiveScoreRejected) {
    std::string text = std::string(kHeader) + "a,2017,2018-01,V,S,P,4,3000,8192,2,1,,0,\n";
    EXPECT_THROW(parse_text(text), ParseError);
}

TEST(ParseRecords, MicroReferencingMissingRecord) {
    std::string text = std::string(kHeader) + "a,2017,2018-01,V,S,P,4,3000,8192,2,1,,10,\n";
    EXPECT_THROW(parse_text(text, "record_id,micro_name,ratio\nzzz,gcc,3\n"), ParseError);
}

TEST(ParseRecords, UnknownMicroRejected) {
    std::string text = std::string(kHeader) + "a,2017,2018-01,V,S,P,4,3000,8192,2,1,,10,\n";
    EXPECT_THROW(parse_text(text, "record_id,micro_name,ratio\na,libquantum,3\n"), ParseError);
    EXPECT_NO_THROW(parse_text(text, "record_id,micro_name,ratio\na,gcc,3\n"));
}

TEST(ParseRecords, LenientCountsAddUp) {
    std::string text = std::string(kHeader) + "a,2017,2018-01,V,S,P,4,3000,8192,2,1,,10,\n" +
                       "b,2019,2018-01,V,S,P,4,3000,8192,2,1,,10,\n" +   // bad suite
                       "c,2017,2018-01,V,S,P,4,3000,8192,2,1,,,\n" +      // no score
                       "d,2017,2018-01,V,S,P,4,3000,8192,2,1,,5,\n" +
                       "a,2017,2018-01,V,S,P,4,3000,8192,2,1,,10,\n";     // duplicate id
    std::istringstream s(text);
    ParseReport rep = parse_records_lenient(s, nullptr);
    EXPECT_EQ(rep.records.size(), 2u);
    EXPECT_EQ(rep.rejected.size(), 3u);
    EXPECT_EQ(rep.records.size() + rep.rejected.size(), rep.input_rows);
}

TEST(ParseRecords, SystemIdCollapsesCaseAndSpace) {
    EXPECT_EQ(make_system_id("  Dell ", "PowerEdge   R740", "Xeon\tGold"), "dell poweredge r740 xeon gold");
}

TEST(Summarize, SingleRecord) {
    std::vector<BenchmarkRecord> recs{testing_support::make_record("x", Suite::Spec2006, 130, 5.0)};
    auto s = summarize(recs, Suite::Spec2006);
    EXPECT_EQ(s.max, 5.0);
    EXPECT_EQ(s.mean, 5.0);
    EXPECT_EQ(s.min, 5.0);
    EXPECT_EQ(s.count, 1u);
}

TEST(Summarize, EmptySuiteErrors) {
    std::vector<BenchmarkRecord> recs{testing_support::make_record("x", Suite::Spec2006, 130, 5.0)};
    EXPECT_THROW(summarize(recs, Suite::Spec2017), DataError);
}

// Values from a separate plain-Python pass over the fixture CSV.
TEST(Summarize, Fixture2006MatchesSpreadsheetPass) {
    auto s = summarize(testing_support::load_fixture_records(false), Suite::Spec2006);
    EXPECT_EQ(s.count, 10u);
    EXPECT_DOUBLE_EQ(s.max, 87.64);
    EXPECT_NEAR(s.mean, 37.1653, 1e-12);
    EXPECT_DOUBLE_EQ(s.min, 5.889);
    EXPECT_NEAR(*s.mean_cores, 12.0, 1e-12);
    EXPECT_NEAR(*s.mean_freq_mhz, 2370.0, 1e-9);
    EXPECT_NEAR(*s.mean_l3_kb, 27699.2, 1e-9);
    EXPECT_NEAR(*s.mean_threads_per_core, 1.7, 1e-12);
}

TEST(Summarize, Fixture1995SkipsMissingL3) {
    auto s = summarize(testing_support::load_fixture_records(false), Suite::Spec1995);
    EXPECT_NEAR(*s.mean_l3_kb, 1682.2857142857142, 1e-9);
    EXPECT_NEAR(s.mean, 15.12341, 1e-12);
}

TEST(Summarize, PermutationInvariant) {
    auto recs = testing_support::load_fixture_records(false);
    auto base = summarize(recs, Suite::Spec2017);
    std::mt19937 rng(7);
    for (int k = 0; k < 20; ++k) {
        std::shuffle(recs.begin(), recs.end(), rng);
        auto s = summarize(recs, Suite::Spec2017);
        EXPECT_EQ(s.min, base.min);
        EXPECT_EQ(s.max, base.max);
        EXPECT_NEAR(s.mean, base.mean, 1e-12);
        EXPECT_NEAR(*s.mean_cores, *base.mean_cores, 1e-12);
    }
}

namespace {

std::vector<BenchmarkRecord> lineage_records(const std::vector<std::pair<std::string, double>>& proc_scores) {
    std::vector<BenchmarkRecord> out;
    int i = 0;
    for (const auto& [proc, score] : proc_scores) {
        auto r = testing_support::make_record("r" + std::to_string(i), Suite::Spec2017, 260 + 6 * i, score);
        r.processor = proc;
        out.push_back(r);
        ++i;
    }
    return out;
}

}  // namespace

TEST(Lineage, CollinearBranchesCorrelateOne) {
    const std::string csv = "processor,genus,parent_genus\nA1,a,\nA2,a2,a\nB1,b,\nB2,b2,b\n";
    auto recs = lineage_records({{"A1", 1.0}, {"A2", 2.0}, {"B1", 2.0}, {"B2", 4.0}});
    std::istringstream in(csv);
    auto res = lineage_series(in, recs);
    ASSERT_EQ(res.lag1_pairs.size(), 2u);
    EXPECT_NEAR(res.lag1_pairs[0].first, 0.0, 1e-12);
    EXPECT_NEAR(res.lag1_pairs[0].second, std::log(2.0), 1e-12);
    ASSERT_TRUE(res.lag1_correlation.has_value());
    EXPECT_NEAR(*res.lag1_correlation, 1.0, 1e-12);
}

TEST(Lineage, ConstantScoresGiveUndefinedCorrelation) {
    const std::string csv = "processor,genus,parent_genus\nA1,a,\nA2,a2,a\nB1,b,\nB2,b2,b\n";
    auto recs = lineage_records({{"A1", 3.0}, {"A2", 3.0}, {"B1", 3.0}, {"B2", 3.0}});
    std::istringstream in(csv);
    auto res = lineage_series(in, recs);
    EXPECT_FALSE(res.lag1_correlation.has_value());
}

TEST(Lineage, SingleGenerationIsInsufficient) {
    const std::string csv = "processor,genus,parent_genus\nA1,a,\nB1,b,\n";
    auto recs = lineage_records({{"A1", 3.0}, {"B1", 4.0}});
    std::istringstream in(csv);
    EXPECT_THROW(lineage_series(in, recs), DataError);
}

TEST(Lineage, AtMostThreeGenerations) {
    const std::string csv = "processor,genus,parent_genus\nA,a,\nB,b,a\nC,c,b\nD,d,c\n";
    auto recs = lineage_records({{"A", 1.0}, {"B", 2.0}, {"C", 3.0}, {"D", 4.0}});
    std::istringstream in(csv);
    auto res = lineage_series(in, recs);
    ASSERT_EQ(res.series.size(), 1u);
    EXPECT_EQ(res.series[0].generations.size(), 3u);
    EXPECT_EQ(res.series[0].generations.front().genus, "b");
}

TEST(Lineage, FixtureRuns) {
    auto recs = testing_support::load_fixture_records(false);
    std::ifstream in(fixture("mini_lineage.csv"));
    auto res = lineage_series(in, recs);
    EXPECT_EQ(res.series.size(), 2u);
    EXPECT_GE(res.lag1_pairs.size(), 2u);
}
