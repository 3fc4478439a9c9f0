#include "i3gn/corpus.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>

#include "json.hpp"

namespace i3gn {

static_assert(std::endian::native == std::endian::little, "corpus I/O assumes a little-endian host");

ItemIndex ItemVocab::intern(std::string_view key) {
  if (auto it = index_.find(std::string(key)); it != index_.end()) return it->second;
  const auto idx = static_cast<ItemIndex>(keys_.size());
  keys_.emplace_back(key);
  support_.push_back(0);
  index_.emplace(keys_.back(), idx);
  return idx;
}

std::optional<ItemIndex> ItemVocab::find(std::string_view key) const {
  if (auto it = index_.find(std::string(key)); it != index_.end()) return it->second;
  return std::nullopt;
}

bool operator==(const SessionCorpus& a, const SessionCorpus& b) {
  if (a.train_count != b.train_count || a.sessions.size() != b.sessions.size() || !(a.vocab == b.vocab)) {
    return false;
  }
  for (std::size_t i = 0; i < a.sessions.size(); ++i) {
    const Session& x = a.sessions[i];
    const Session& y = b.sessions[i];
    if (x.id != y.id || x.start_time != y.start_time || x.items != y.items) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Timestamps

namespace {

bool read_digits(std::string_view s, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;

  const bool numeric = std::all_of(text.begin(), text.end(), [](char c) { return (c >= '0' && c <= '9') || c == '.'; });
  if (numeric && text.find('.') == text.rfind('.')) {
    Timestamp value = 0;
    const auto digits = text.substr(0, text.find('.'));
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty()) return std::nullopt;
    return value;
  }

  int year = 0, month = 0, day = 0;
  if (!read_digits(text, 0, 4, year) || text.size() < 10 || text[4] != '-' || !read_digits(text, 5, 2, month) ||
      text[7] != '-' || !read_digits(text, 8, 2, day)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year(year), std::chrono::month(static_cast<unsigned>(month)),
                                        std::chrono::day(static_cast<unsigned>(day))};
  if (!ymd.ok()) return std::nullopt;
  Timestamp seconds = std::chrono::sys_days(ymd).time_since_epoch().count() * Timestamp{86400};

  std::size_t pos = 10;
  if (pos == text.size()) return seconds;
  if (text[pos] != 'T' && text[pos] != ' ') return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!read_digits(text, pos + 1, 2, hh) || text.size() < pos + 9 || text[pos + 3] != ':' ||
      !read_digits(text, pos + 4, 2, mm) || text[pos + 6] != ':' || !read_digits(text, pos + 7, 2, ss)) {
    return std::nullopt;
  }
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  seconds += hh * 3600 + mm * 60 + ss;
  pos += 9;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
  }
  if (pos == text.size()) return seconds;
  if (text[pos] == 'Z' && pos + 1 == text.size()) return seconds;
  if ((text[pos] == '+' || text[pos] == '-') && text.size() == pos + 6 && text[pos + 3] == ':') {
    int oh = 0, om = 0;
    if (!read_digits(text, pos + 1, 2, oh) || !read_digits(text, pos + 4, 2, om)) return std::nullopt;
    const Timestamp offset = oh * 3600 + om * 60;
    return text[pos] == '+' ? seconds - offset : seconds + offset;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Ingestion

SessionCorpus ingest_events(std::span<const Event> events) {
  if (events.empty()) throw CorpusError("no events to ingest");

  struct Click {
    Timestamp time;
    const std::string* item;
  };
  std::unordered_map<std::string_view, std::size_t> group_of;
  std::vector<std::vector<Click>> groups;
  for (const Event& e : events) {
    if (e.session_key.empty() || e.item_key.empty()) throw CorpusError("event with an empty key");
    if (e.timestamp < 0) throw CorpusError("negative timestamp for session '" + e.session_key + "'");
    auto [it, inserted] = group_of.try_emplace(e.session_key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back({e.timestamp, &e.item_key});
  }
  for (auto& g : groups) {
    std::stable_sort(g.begin(), g.end(), [](const Click& a, const Click& b) { return a.time < b.time; });
  }
  // Chronological by first click; first appearance in the input breaks ties.
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return groups[a].front().time < groups[b].front().time; });

  SessionCorpus corpus;
  corpus.sessions.reserve(groups.size());
  for (std::size_t g : order) {
    Session s;
    s.id = static_cast<SessionId>(corpus.sessions.size());
    s.start_time = groups[g].front().time;
    for (const Click& c : groups[g]) {
      const ItemIndex item = corpus.vocab.intern(*c.item);
      corpus.vocab.set_support(item, corpus.vocab.support(item) + 1);
      s.items.push_back(item);
    }
    corpus.sessions.push_back(std::move(s));
  }
  corpus.train_count = corpus.sessions.size();
  return corpus;
}

namespace {

std::vector<std::string_view> split_row(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == delimiter && !quoted) {
      fields.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  fields.push_back(trim(line.substr(start)));
  return fields;
}

std::size_t resolve_column(const ColumnRef& ref, const std::vector<std::string_view>& header, const char* role) {
  if (const auto* idx = std::get_if<std::size_t>(&ref)) return *idx;
  const auto& name = std::get<std::string>(ref);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw CorpusError(std::string("header has no column '") + name + "' for " + role);
}

}  // namespace

SessionCorpus ingest_csv(std::istream& in, const CsvOptions& options, std::vector<RowError>* errors) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header_storage;
  std::vector<std::string_view> header;
  if (options.has_header) {
    if (!std::getline(in, line)) throw CorpusError("input is empty");
    ++line_no;
    for (auto f : split_row(line, options.delimiter)) header_storage.emplace_back(f);
    for (const auto& h : header_storage) header.push_back(h);
  }
  const bool named = std::holds_alternative<std::string>(options.columns.session) ||
                     std::holds_alternative<std::string>(options.columns.timestamp) ||
                     std::holds_alternative<std::string>(options.columns.item) ||
                     (options.columns.event_type && std::holds_alternative<std::string>(*options.columns.event_type));
  if (named && !options.has_header) throw CorpusError("named columns require a header row");

  const std::size_t session_col = resolve_column(options.columns.session, header, "session");
  const std::size_t time_col = resolve_column(options.columns.timestamp, header, "timestamp");
  const std::size_t item_col = resolve_column(options.columns.item, header, "item");
  std::optional<std::size_t> type_col;
  if (options.columns.event_type) type_col = resolve_column(*options.columns.event_type, header, "event type");
  const std::size_t needed = std::max({session_col, time_col, item_col, type_col.value_or(0)}) + 1;

  std::vector<Event> events;
  auto reject = [&](const std::string& message) {
    if (!options.skip_malformed) throw ParseError(line_no, message);
    if (errors != nullptr) errors->push_back({line_no, message});
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_row(line, options.delimiter);
    if (fields.size() < needed) {
      reject("expected at least " + std::to_string(needed) + " fields, found " + std::to_string(fields.size()));
      continue;
    }
    if (type_col && !options.keep_event_types.empty() &&
        std::find(options.keep_event_types.begin(), options.keep_event_types.end(), fields[*type_col]) ==
            options.keep_event_types.end()) {
      continue;
    }
    const auto ts = parse_timestamp(fields[time_col]);
    if (!ts) {
      reject("unparseable timestamp '" + std::string(fields[time_col]) + "'");
      continue;
    }
    if (*ts < 0) {
      reject("negative timestamp");
      continue;
    }
    if (fields[session_col].empty() || fields[item_col].empty()) {
      reject("empty session or item key");
      continue;
    }
    events.push_back({std::string(fields[session_col]), *ts, std::string(fields[item_col])});
  }
  if (events.empty()) throw CorpusError("input contains no events");
  return ingest_events(events);
}

// ---------------------------------------------------------------------------
// Filtering and splitting

namespace {

// Renumbers session ids, drops items without any click and recomputes
// supports. Surviving items keep their relative order.
SessionCorpus compact(std::vector<Session> sessions, const ItemVocab& old_vocab, std::size_t train_count) {
  std::vector<std::uint64_t> counts(old_vocab.size(), 0);
  for (const auto& s : sessions)
    for (ItemIndex i : s.items) ++counts[i];

  SessionCorpus out;
  std::vector<ItemIndex> remap(old_vocab.size(), 0);
  for (ItemIndex i = 0; i < old_vocab.size(); ++i) {
    if (counts[i] == 0) continue;
    remap[i] = out.vocab.intern(old_vocab.key(i));
    out.vocab.set_support(remap[i], counts[i]);
  }
  for (std::size_t k = 0; k < sessions.size(); ++k) {
    sessions[k].id = static_cast<SessionId>(k);
    for (ItemIndex& i : sessions[k].items) i = remap[i];
  }
  out.sessions = std::move(sessions);
  out.train_count = train_count;
  return out;
}

}  // namespace

SessionCorpus filter_corpus(const SessionCorpus& corpus, std::size_t min_len, std::uint64_t min_support) {
  std::vector<Session> sessions = corpus.sessions;
  std::vector<bool> is_train(sessions.size());
  for (std::size_t k = 0; k < sessions.size(); ++k) is_train[k] = k < corpus.train_count;

  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::uint64_t> counts(corpus.vocab.size(), 0);
    for (const auto& s : sessions)
      for (ItemIndex i : s.items) ++counts[i];
    for (auto& s : sessions) {
      const auto before = s.items.size();
      std::erase_if(s.items, [&](ItemIndex i) { return counts[i] < min_support; });
      changed = changed || s.items.size() != before;
    }
    std::vector<Session> kept;
    std::vector<bool> kept_train;
    for (std::size_t k = 0; k < sessions.size(); ++k) {
      if (sessions[k].items.size() >= min_len) {
        kept.push_back(std::move(sessions[k]));
        kept_train.push_back(is_train[k]);
      } else {
        changed = true;
      }
    }
    sessions = std::move(kept);
    is_train = std::move(kept_train);
  }
  if (sessions.empty()) throw CorpusError("corpus fully filtered");
  const auto train_count = static_cast<std::size_t>(std::count(is_train.begin(), is_train.end(), true));
  return compact(std::move(sessions), corpus.vocab, train_count);
}

SessionCorpus split_by_time(const SessionCorpus& corpus, Timestamp test_window) {
  if (corpus.sessions.empty()) throw CorpusError("cannot split an empty corpus");
  const Timestamp earliest = corpus.sessions.front().start_time;
  const Timestamp latest = corpus.sessions.back().start_time;
  if (test_window <= 0 || test_window >= latest - earliest) {
    throw CorpusError("test window of " + std::to_string(test_window) + " s must be positive and shorter than the " +
                      std::to_string(latest - earliest) + " s corpus span");
  }
  const Timestamp boundary = latest - test_window;
  std::vector<Session> train, test;
  for (const auto& s : corpus.sessions) (s.start_time > boundary ? test : train).push_back(s);
  if (train.empty()) throw CorpusError("split leaves the training partition empty");

  std::vector<bool> seen(corpus.vocab.size(), false);
  for (const auto& s : train)
    for (ItemIndex i : s.items) seen[i] = true;
  std::erase_if(test, [&](const Session& s) {
    return std::any_of(s.items.begin(), s.items.end(), [&](ItemIndex i) { return !seen[i]; });
  });
  if (test.empty()) throw CorpusError("split leaves the test partition empty");

  const std::size_t train_count = train.size();
  train.insert(train.end(), std::make_move_iterator(test.begin()), std::make_move_iterator(test.end()));
  return compact(std::move(train), corpus.vocab, train_count);
}

Fraction parse_fraction(std::string_view text) {
  text = trim(text);
  Fraction f;
  const auto slash = text.find('/');
  auto parse = [&](std::string_view part, std::uint64_t& out) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    if (ec != std::errc() || ptr != part.data() + part.size() || part.empty()) {
      throw std::invalid_argument("bad fraction '" + std::string(text) + "'");
    }
  };
  if (slash == std::string_view::npos) {
    parse(text, f.numerator);
  } else {
    parse(text.substr(0, slash), f.numerator);
    parse(text.substr(slash + 1), f.denominator);
  }
  if (f.denominator == 0 || f.numerator == 0 || f.numerator > f.denominator) {
    throw std::invalid_argument("fraction '" + std::string(text) + "' must lie in (0, 1]");
  }
  return f;
}

SessionCorpus take_recent_fraction(const SessionCorpus& corpus, Fraction fraction) {
  if (fraction.denominator == 0 || fraction.numerator == 0 || fraction.numerator > fraction.denominator) {
    throw std::invalid_argument("take_recent_fraction: fraction must lie in (0, 1]");
  }
  const std::uint64_t n = corpus.train_count;
  const std::uint64_t keep = (fraction.numerator * n + fraction.denominator - 1) / fraction.denominator;
  std::vector<Session> sessions(corpus.sessions.begin() + static_cast<std::ptrdiff_t>(n - keep), corpus.sessions.end());
  return compact(std::move(sessions), corpus.vocab, static_cast<std::size_t>(keep));
}

std::vector<TrainingExample> augment(const Session& session) {
  std::vector<TrainingExample> out;
  for (std::size_t n = 1; n < session.items.size(); ++n) {
    out.push_back({session.id, std::vector<ItemIndex>(session.items.begin(), session.items.begin() + n),
                   session.items[n]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence
//
// corpus.bin (little-endian):
//   u8 version | u64 session count | u64 train count | u64 vocab size
//   per session: i64 start_time | u32 length | u32 items[length]
// vocab.json: {"format_version": 1, "items": [{"key": ..., "support": ...}, ...]}
// with the item index equal to the array position.

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CorpusError("'" + path.string() + "' is truncated");
  return value;
}

}  // namespace

void save_corpus(const std::filesystem::path& dir, const SessionCorpus& corpus) {
  std::filesystem::create_directories(dir);
  {
    const auto path = dir / "corpus.bin";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError("cannot write '" + path.string() + "'");
    put<std::uint8_t>(out, kCorpusFormatVersion);
    put<std::uint64_t>(out, corpus.sessions.size());
    put<std::uint64_t>(out, corpus.train_count);
    put<std::uint64_t>(out, corpus.vocab.size());
    for (const Session& s : corpus.sessions) {
      put<std::int64_t>(out, s.start_time);
      put<std::uint32_t>(out, static_cast<std::uint32_t>(s.items.size()));
      out.write(reinterpret_cast<const char*>(s.items.data()),
                static_cast<std::streamsize>(s.items.size() * sizeof(ItemIndex)));
    }
    if (!out) throw CorpusError("write to '" + path.string() + "' failed");
  }
  nlohmann::json items = nlohmann::json::array();
  for (ItemIndex i = 0; i < corpus.vocab.size(); ++i) {
    items.push_back({{"key", corpus.vocab.key(i)}, {"support", corpus.vocab.support(i)}});
  }
  const nlohmann::json doc = {{"format_version", kCorpusFormatVersion}, {"items", std::move(items)}};
  const auto path = dir / "vocab.json";
  std::ofstream out(path, std::ios::trunc);
  out << doc.dump(1) << '\n';
  if (!out) throw CorpusError("write to '" + path.string() + "' failed");
}

SessionCorpus load_corpus(const std::filesystem::path& dir) {
  SessionCorpus corpus;
  {
    const auto path = dir / "vocab.json";
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open '" + path.string() + "'");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
      if (doc.at("format_version").get<int>() != kCorpusFormatVersion) {
        throw CorpusError("unsupported vocab format version in '" + path.string() + "'");
      }
      for (const auto& item : doc.at("items")) {
        const auto key = item.at("key").get<std::string>();
        const ItemIndex idx = corpus.vocab.intern(key);
        if (idx + 1 != corpus.vocab.size()) throw CorpusError("duplicate item key '" + key + "' in vocab.json");
        corpus.vocab.set_support(idx, item.at("support").get<std::uint64_t>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError("malformed '" + path.string() + "': " + e.what());
    }
  }
  const auto path = dir / "corpus.bin";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open '" + path.string() + "'");
  const auto version = get<std::uint8_t>(in, path);
  if (version != kCorpusFormatVersion) {
    throw CorpusError("unsupported corpus format version " + std::to_string(version));
  }
  const auto count = get<std::uint64_t>(in, path);
  corpus.train_count = get<std::uint64_t>(in, path);
  const auto vocab_size = get<std::uint64_t>(in, path);
  if (vocab_size != corpus.vocab.size() || corpus.train_count > count) {
    throw CorpusError("'" + path.string() + "' does not match vocab.json");
  }
  corpus.sessions.resize(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    Session& s = corpus.sessions[k];
    s.id = static_cast<SessionId>(k);
    s.start_time = get<std::int64_t>(in, path);
    s.items.resize(get<std::uint32_t>(in, path));
    in.read(reinterpret_cast<char*>(s.items.data()), static_cast<std::streamsize>(s.items.size() * sizeof(ItemIndex)));
    if (!in) throw CorpusError("'" + path.string() + "' is truncated");
    for (ItemIndex i : s.items) {
      if (i >= vocab_size) throw CorpusError("item index out of range in '" + path.string() + "'");
    }
  }
  return corpus;
}

}  // namespace i3gn
