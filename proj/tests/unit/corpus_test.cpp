#include "i3gn/corpus.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unistd.h>

namespace {

using i3gn::CorpusError;
using i3gn::Event;
using i3gn::ItemIndex;
using i3gn::SessionCorpus;

std::vector<std::string> keys(const SessionCorpus& c, std::size_t session) {
  std::vector<std::string> out;
  for (ItemIndex i : c.sessions[session].items) out.push_back(c.vocab.key(i));
  return out;
}

// Sessions of `per_day` one-click-apart events each; session d*per_day+k
// starts on day d.
SessionCorpus daily_corpus(std::size_t days, const std::vector<std::vector<std::string>>& items) {
  std::vector<Event> events;
  for (std::size_t s = 0; s < items.size(); ++s) {
    const i3gn::Timestamp start = static_cast<i3gn::Timestamp>((s * days / items.size()) * 86400 + s);
    for (std::size_t k = 0; k < items[s].size(); ++k) {
      events.push_back({"s" + std::to_string(s), start + static_cast<i3gn::Timestamp>(k), items[s][k]});
    }
  }
  return i3gn::ingest_events(events);
}

TEST(ParseTimestamp, AcceptsEpochAndIso) {
  EXPECT_EQ(i3gn::parse_timestamp("1396867869"), 1396867869);
  EXPECT_EQ(i3gn::parse_timestamp("1396867869.75"), 1396867869);
  EXPECT_EQ(i3gn::parse_timestamp("1970-01-02"), 86400);
  EXPECT_EQ(i3gn::parse_timestamp("2014-04-07T10:51:09.277Z"), 1396867869);
  EXPECT_EQ(i3gn::parse_timestamp("2014-04-07 12:51:09+02:00"), 1396867869);
  EXPECT_EQ(i3gn::parse_timestamp("2014-04-07T08:51:09-02:00"), 1396867869);
  EXPECT_FALSE(i3gn::parse_timestamp("yesterday"));
  EXPECT_FALSE(i3gn::parse_timestamp("2014-13-01"));
  EXPECT_FALSE(i3gn::parse_timestamp(""));
}

TEST(Ingest, SingleSessionKeepsClickOrder) {
  const std::vector<Event> events{{"a", 30, "x"}, {"a", 10, "y"}, {"a", 20, "z"}};
  const auto c = i3gn::ingest_events(events);
  ASSERT_EQ(c.sessions.size(), 1u);
  EXPECT_EQ(keys(c, 0), (std::vector<std::string>{"y", "z", "x"}));
  EXPECT_EQ(c.sessions[0].start_time, 10);
  EXPECT_FALSE(c.is_split());
}

TEST(Ingest, InterleavedSessionsAreOrderedByFirstClick) {
  std::mt19937_64 rng(3);
  std::vector<Event> events;
  std::map<std::string, i3gn::Timestamp> first;
  for (int i = 0; i < 200; ++i) {
    const std::string session = "s" + std::to_string(rng() % 17);
    const auto t = static_cast<i3gn::Timestamp>(rng() % 100000);
    events.push_back({session, t, "i" + std::to_string(rng() % 9)});
    auto [it, inserted] = first.try_emplace(session, t);
    if (!inserted) it->second = std::min(it->second, t);
  }
  const auto c = i3gn::ingest_events(events);
  ASSERT_EQ(c.sessions.size(), first.size());
  for (std::size_t s = 0; s < c.sessions.size(); ++s) {
    EXPECT_EQ(c.sessions[s].id, s);
    if (s > 0) EXPECT_LE(c.sessions[s - 1].start_time, c.sessions[s].start_time);
  }
  std::vector<i3gn::Timestamp> expected;
  for (auto& [k, t] : first) expected.push_back(t);
  std::sort(expected.begin(), expected.end());
  for (std::size_t s = 0; s < expected.size(); ++s) EXPECT_EQ(c.sessions[s].start_time, expected[s]);
}

TEST(Ingest, SupportCountsEveryClick) {
  const std::vector<Event> events{{"a", 1, "x"}, {"a", 2, "x"}, {"b", 3, "x"}, {"b", 4, "y"}};
  const auto c = i3gn::ingest_events(events);
  EXPECT_EQ(c.vocab.support(*c.vocab.find("x")), 3u);
  EXPECT_EQ(c.vocab.support(*c.vocab.find("y")), 1u);
}

TEST(IngestCsv, ClickLogWithCategoryColumn) {
  std::istringstream in(
      "1,2014-04-07T10:51:09.277Z,214536502,0\n"
      "1,2014-04-07T10:54:09.868Z,214536500,0\n"
      "1,2014-04-07T10:54:46.998Z,214536506,0\n"
      "2,2014-04-07T13:56:37.614Z,214662742,0\n"
      "2,2014-04-07T13:57:19.373Z,214662742,0\n");
  const auto c = i3gn::ingest_csv(in, {});
  ASSERT_EQ(c.sessions.size(), 2u);
  EXPECT_EQ(keys(c, 0), (std::vector<std::string>{"214536502", "214536500", "214536506"}));
  EXPECT_EQ(keys(c, 1), (std::vector<std::string>{"214662742", "214662742"}));
}

TEST(IngestCsv, NamedColumnsAndEventTypeFilter) {
  std::istringstream in(
      "sessionId;itemId;eventdate;kind\n"
      "9;a;2016-05-09;view\n"
      "9;b;2016-05-10;buy\n"
      "9;c;2016-05-11;view\n");
  i3gn::CsvOptions opts;
  opts.delimiter = ';';
  opts.has_header = true;
  opts.columns = {std::string("sessionId"), std::string("eventdate"), std::string("itemId"), std::string("kind")};
  opts.keep_event_types = {"view"};
  const auto c = i3gn::ingest_csv(in, opts);
  EXPECT_EQ(keys(c, 0), (std::vector<std::string>{"a", "c"}));
}

TEST(IngestCsv, MalformedRowsReportTheirLine) {
  const std::string text = "1,100,a\n1,oops,b\n2\n2,300,c\n";
  {
    std::istringstream in(text);
    try {
      i3gn::ingest_csv(in, {});
      FAIL() << "expected ParseError";
    } catch (const i3gn::ParseError& e) {
      EXPECT_EQ(e.line(), 2u);
    }
  }
  std::istringstream in(text);
  i3gn::CsvOptions opts;
  opts.skip_malformed = true;
  std::vector<i3gn::RowError> errors;
  const auto c = i3gn::ingest_csv(in, opts, &errors);
  ASSERT_EQ(errors.size(), 2u);
  EXPECT_EQ(errors[0].line, 2u);
  EXPECT_EQ(errors[1].line, 3u);
  EXPECT_EQ(c.sessions.size(), 2u);
}

TEST(IngestCsv, EmptyInputIsFatal) {
  std::istringstream in("");
  EXPECT_THROW(i3gn::ingest_csv(in, {}), CorpusError);
  EXPECT_THROW(i3gn::ingest_events({}), CorpusError);
}

TEST(Filter, DropsShortSessionsAndRareItems) {
  std::vector<Event> events;
  i3gn::Timestamp t = 0;
  auto add = [&](const std::string& s, std::initializer_list<const char*> items) {
    for (const char* i : items) events.push_back({s, t++, i});
  };
  for (int k = 0; k < 5; ++k) add("p" + std::to_string(k), {"a", "b"});
  add("single", {"a"});
  add("rare", {"a", "r", "r", "r", "r"});  // r has 4 clicks
  const auto c = i3gn::filter_corpus(i3gn::ingest_events(events), 2, 5);
  EXPECT_FALSE(c.vocab.find("r"));
  for (const auto& s : c.sessions) EXPECT_GE(s.items.size(), 2u);
  EXPECT_EQ(c.sessions.size(), 5u);
}

// Oracle: apply both rules naively until nothing changes.
std::vector<std::vector<std::string>> naive_filter(std::vector<std::vector<std::string>> sessions, std::size_t min_len,
                                                   std::size_t min_support) {
  for (bool changed = true; changed;) {
    changed = false;
    std::map<std::string, std::size_t> count;
    for (auto& s : sessions)
      for (auto& i : s) ++count[i];
    for (auto& s : sessions) {
      const auto n = s.size();
      std::erase_if(s, [&](const std::string& i) { return count[i] < min_support; });
      changed = changed || n != s.size();
    }
    const auto n = sessions.size();
    std::erase_if(sessions, [&](const auto& s) { return s.size() < min_len; });
    changed = changed || n != sessions.size();
  }
  return sessions;
}

TEST(Filter, ReachesTheFixedPoint) {
  // Removing the rare item "r" shortens s4 to one click, which then drops
  // "c" below the support floor, which shortens s3.
  const std::vector<std::vector<std::string>> raw{
      {"a", "b", "a"}, {"a", "b", "b"}, {"a", "b", "c"}, {"c", "a", "b"}, {"c", "r"},
  };
  const auto c = i3gn::filter_corpus(daily_corpus(5, raw), 2, 3);
  const auto expected = naive_filter(raw, 2, 3);
  ASSERT_EQ(c.sessions.size(), expected.size());
  for (std::size_t s = 0; s < expected.size(); ++s) EXPECT_EQ(keys(c, s), expected[s]);
  std::map<ItemIndex, std::uint64_t> support;
  for (const auto& s : c.sessions)
    for (ItemIndex i : s.items) ++support[i];
  for (auto [i, n] : support) {
    EXPECT_GE(n, 3u);
    EXPECT_EQ(c.vocab.support(i), n);
  }
  EXPECT_EQ(support.size(), c.vocab.size());
}

TEST(Filter, RandomCorporaMatchTheNaiveOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<std::string>> raw(40);
    for (auto& s : raw) {
      const std::size_t n = 1 + rng() % 6;
      for (std::size_t k = 0; k < n; ++k) s.push_back("i" + std::to_string(rng() % 25));
    }
    const auto expected = naive_filter(raw, 2, 4);
    if (expected.empty()) {
      EXPECT_THROW(i3gn::filter_corpus(daily_corpus(5, raw), 2, 4), CorpusError);
      continue;
    }
    const auto c = i3gn::filter_corpus(daily_corpus(5, raw), 2, 4);
    ASSERT_EQ(c.sessions.size(), expected.size());
    for (std::size_t s = 0; s < expected.size(); ++s) EXPECT_EQ(keys(c, s), expected[s]);
  }
}

TEST(Filter, EverythingRemovedIsFatal) {
  const std::vector<Event> events{{"a", 1, "x"}, {"b", 2, "y"}};
  EXPECT_THROW(i3gn::filter_corpus(i3gn::ingest_events(events)), CorpusError);
}

TEST(Split, LastDayBecomesTest) {
  std::vector<std::vector<std::string>> raw;
  for (int d = 0; d < 10; ++d) raw.push_back({"a", "b", d % 2 ? "c" : "a"});
  const auto c = i3gn::split_by_time(daily_corpus(10, raw), 86400);
  EXPECT_EQ(c.train_count, 9u);
  EXPECT_EQ(c.test().size(), 1u);
  EXPECT_EQ(c.test()[0].start_time, 9 * 86400 + 9);
}

TEST(Split, UnseenItemDropsTheTestSession) {
  std::vector<std::vector<std::string>> raw;
  for (int d = 0; d < 8; ++d) raw.push_back({"a", "b"});
  raw.push_back({"a", "new"});
  raw.push_back({"b", "a"});
  const auto c = i3gn::split_by_time(daily_corpus(10, raw), 86400 + 10);
  ASSERT_EQ(c.test().size(), 1u);
  EXPECT_EQ(keys(c, c.train_count), (std::vector<std::string>{"b", "a"}));
  EXPECT_FALSE(c.vocab.find("new"));
}

TEST(Split, DegenerateWindowsAreErrors) {
  std::vector<std::vector<std::string>> raw(4, {"a", "b"});
  const auto c = daily_corpus(4, raw);
  EXPECT_THROW(i3gn::split_by_time(c, 10 * 86400), CorpusError);
  EXPECT_THROW(i3gn::split_by_time(c, 0), CorpusError);
  raw.back() = {"z", "y"};
  EXPECT_THROW(i3gn::split_by_time(daily_corpus(4, raw), 86400), CorpusError);
}

TEST(RecentFraction, CeilingArithmetic) {
  std::vector<std::vector<std::string>> raw;
  for (int s = 0; s < 65; ++s) raw.push_back({"a", "b"});
  const auto split = i3gn::split_by_time(daily_corpus(65, raw), 86400);
  ASSERT_EQ(split.train_count, 64u);
  const auto one = i3gn::take_recent_fraction(split, i3gn::parse_fraction("1/64"));
  EXPECT_EQ(one.train_count, 1u);
  EXPECT_EQ(one.sessions.front().start_time, split.sessions[63].start_time);
  EXPECT_EQ(one.test().size(), split.test().size());
  EXPECT_EQ(i3gn::take_recent_fraction(split, {1, 1}), split);

  std::vector<std::vector<std::string>> eight(9, {"a", "b"});
  const auto c8 = i3gn::split_by_time(daily_corpus(9, eight), 86400);
  ASSERT_EQ(c8.train_count, 8u);
  EXPECT_EQ(i3gn::take_recent_fraction(c8, {1, 4}).train_count, 2u);
  EXPECT_EQ(i3gn::take_recent_fraction(c8, {1, 3}).train_count, 3u);
}

TEST(RecentFraction, ParsesFractions) {
  EXPECT_EQ(i3gn::parse_fraction("1/64").denominator, 64u);
  EXPECT_EQ(i3gn::parse_fraction("1").numerator, 1u);
  EXPECT_THROW(i3gn::parse_fraction("3/2"), std::invalid_argument);
  EXPECT_THROW(i3gn::parse_fraction("1/0"), std::invalid_argument);
  EXPECT_THROW(i3gn::parse_fraction("a/b"), std::invalid_argument);
}

TEST(Augment, PrefixesAndLabels) {
  const i3gn::Session s{4, {1, 2, 3}, 0};
  const auto ex = i3gn::augment(s);
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_EQ(ex[0].prefix, (std::vector<ItemIndex>{1}));
  EXPECT_EQ(ex[0].label, 2u);
  EXPECT_EQ(ex[1].prefix, (std::vector<ItemIndex>{1, 2}));
  EXPECT_EQ(ex[1].label, 3u);
  EXPECT_EQ(ex[1].session, 4u);
  EXPECT_EQ(i3gn::augment({0, {7, 8}, 0}).size(), 1u);
  EXPECT_TRUE(i3gn::augment({0, {7}, 0}).empty());
}

TEST(Augment, EveryPrefixPlusLabelIsASessionPrefix) {
  const i3gn::Session s{0, {5, 1, 5, 2, 9, 9, 3}, 0};
  const auto ex = i3gn::augment(s);
  ASSERT_EQ(ex.size(), 6u);
  for (std::size_t n = 0; n < ex.size(); ++n) {
    auto full = ex[n].prefix;
    full.push_back(ex[n].label);
    EXPECT_TRUE(std::equal(full.begin(), full.end(), s.items.begin()));
    EXPECT_EQ(ex[n].label, s.items[n + 1]);
  }
}

class CorpusFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / ("i3gn_corpus_" + std::to_string(::getpid()));
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CorpusFiles, RoundTripIsExact) {
  std::vector<std::vector<std::string>> raw;
  for (int s = 0; s < 12; ++s) raw.push_back({"k" + std::to_string(s % 3), "k\"q" + std::to_string(s % 4)});
  const auto c = i3gn::split_by_time(daily_corpus(12, raw), 86400);
  i3gn::save_corpus(dir_, c);
  std::ifstream bin(dir_ / "corpus.bin", std::ios::binary);
  EXPECT_EQ(bin.get(), i3gn::kCorpusFormatVersion);
  EXPECT_EQ(i3gn::load_corpus(dir_), c);
}

TEST_F(CorpusFiles, CorruptFilesAreRejected) {
  const auto c = daily_corpus(2, {{"a", "b"}, {"b", "a"}});
  i3gn::save_corpus(dir_, c);
  std::filesystem::resize_file(dir_ / "corpus.bin", 20);
  EXPECT_THROW(i3gn::load_corpus(dir_), CorpusError);
  i3gn::save_corpus(dir_, c);
  {
    std::fstream f(dir_ / "corpus.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.put(99);
  }
  EXPECT_THROW(i3gn::load_corpus(dir_), CorpusError);
  EXPECT_THROW(i3gn::load_corpus(dir_ / "missing"), CorpusError);
}

}  // namespace
