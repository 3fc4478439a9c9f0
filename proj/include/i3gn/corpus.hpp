#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace i3gn {

using ItemIndex = std::uint32_t;
using SessionId = std::uint32_t;
/// Seconds since the Unix epoch.
using Timestamp = std::int64_t;
using ItemSeq = std::span<const ItemIndex>;

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input row; `line` is 1-based.
class ParseError : public CorpusError {
 public:
  ParseError(std::size_t line, const std::string& message)
      : CorpusError("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// One raw click.
struct Event {
  std::string session_key;
  Timestamp timestamp = 0;
  std::string item_key;
};

struct Session {
  SessionId id = 0;
  std::vector<ItemIndex> items;
  Timestamp start_time = 0;
};

/// Bijection between raw item keys and dense indices, plus click counts.
class ItemVocab {
 public:
  /// Index of `key`, adding it with zero support if new.
  ItemIndex intern(std::string_view key);
  std::optional<ItemIndex> find(std::string_view key) const;

  const std::string& key(ItemIndex item) const { return keys_.at(item); }
  std::uint64_t support(ItemIndex item) const { return support_.at(item); }
  void set_support(ItemIndex item, std::uint64_t count) { support_.at(item) = count; }
  std::size_t size() const { return keys_.size(); }

  friend bool operator==(const ItemVocab& a, const ItemVocab& b) {
    return a.keys_ == b.keys_ && a.support_ == b.support_;
  }

 private:
  std::unordered_map<std::string, ItemIndex> index_;
  std::vector<std::string> keys_;
  std::vector<std::uint64_t> support_;
};

/// Sessions in chronological order. Sessions [0, train_count) form the
/// training partition and the rest the test partition; an unsplit corpus
/// has train_count == sessions.size().
struct SessionCorpus {
  std::vector<Session> sessions;
  ItemVocab vocab;
  std::size_t train_count = 0;

  bool is_split() const { return train_count < sessions.size(); }
  std::span<const Session> train() const { return std::span(sessions).first(train_count); }
  std::span<const Session> test() const { return std::span(sessions).subspan(train_count); }

  friend bool operator==(const SessionCorpus& a, const SessionCorpus& b);
};

struct TrainingExample {
  SessionId session = 0;
  std::vector<ItemIndex> prefix;
  ItemIndex label = 0;
};

/// Column reference: positional index or a header name.
using ColumnRef = std::variant<std::size_t, std::string>;

struct ColumnMap {
  ColumnRef session = std::size_t{0};
  ColumnRef timestamp = std::size_t{1};
  ColumnRef item = std::size_t{2};
  std::optional<ColumnRef> event_type;
};

struct CsvOptions {
  char delimiter = ',';
  bool has_header = false;
  ColumnMap columns;
  /// When non-empty (and columns.event_type is set) only rows whose event
  /// type is listed are kept.
  std::vector<std::string> keep_event_types;
  /// Collect malformed rows into the error list instead of throwing.
  bool skip_malformed = false;
};

struct RowError {
  std::size_t line = 0;
  std::string message;
};

/// Parses epoch seconds ("1396867869", "1396867869.5") or ISO-8601
/// ("2014-04-07", "2014-04-07T10:51:09.277Z", "2014-04-07 10:51:09+02:00").
/// Fractional seconds are truncated.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Groups events by session key, orders each session by timestamp (stable
/// for equal timestamps) and the sessions by their first event. Session ids
/// and item indices are assigned in that chronological order.
SessionCorpus ingest_events(std::span<const Event> events);

/// Reads delimited rows and ingests them. Throws ParseError on the first
/// malformed row unless options.skip_malformed, and CorpusError when no
/// event survives.
SessionCorpus ingest_csv(std::istream& in, const CsvOptions& options,
                         std::vector<RowError>* errors = nullptr);

/// Drops items with fewer than `min_support` clicks and sessions shorter
/// than `min_len`, repeating until neither rule removes anything, then
/// re-indexes items densely.
SessionCorpus filter_corpus(const SessionCorpus& corpus, std::size_t min_len = 2,
                            std::uint64_t min_support = 5);

/// Sessions starting after (latest start - test_window) become the test
/// partition; test sessions with an item unseen in training are dropped.
SessionCorpus split_by_time(const SessionCorpus& corpus, Timestamp test_window);

struct Fraction {
  std::uint64_t numerator = 1;
  std::uint64_t denominator = 1;
};

/// Parses "p/q" or a plain integer.
Fraction parse_fraction(std::string_view text);

/// Keeps the ceil(fraction * |train|) most recent training sessions.
SessionCorpus take_recent_fraction(const SessionCorpus& corpus, Fraction fraction);

/// ([v1], v2), ([v1, v2], v3), ..., ([v1..v_{n-1}], v_n).
std::vector<TrainingExample> augment(const Session& session);

inline constexpr std::uint8_t kCorpusFormatVersion = 1;

/// Writes `corpus.bin` and `vocab.json` into `dir` (created if needed).
void save_corpus(const std::filesystem::path& dir, const SessionCorpus& corpus);
SessionCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace i3gn
