#include "immtsf/io.hpp"

#include <json.hpp>

#include <fnmatch.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace immtsf::io {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_number(std::string_view s) {
  double x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return x;
}

int parse_digits(std::string_view s, std::size_t pos, std::size_t n, const std::string& original) {
  if (pos + n > s.size()) throw Error(ErrorKind::Parse, "truncated timestamp '" + original + "'");
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) throw Error(ErrorKind::Parse, "bad timestamp '" + original + "'");
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

}  // namespace

double parse_timestamp(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) throw Error(ErrorKind::Parse, "empty timestamp");
  if (auto x = parse_number(s)) {
    if (!std::isfinite(*x)) throw Error(ErrorKind::Parse, "non-finite timestamp '" + raw + "'");
    return *x;
  }

  // YYYY-MM-DD[(T| )HH:MM[:SS[.fff]]][Z|(+|-)HH[:MM]]
  const int year = parse_digits(s, 0, 4, raw);
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') throw Error(ErrorKind::Parse, "bad date in '" + raw + "'");
  const int month = parse_digits(s, 5, 2, raw);
  const int day = parse_digits(s, 8, 2, raw);
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) throw Error(ErrorKind::Parse, "invalid calendar date in '" + raw + "'");
  double seconds = static_cast<double>(std::chrono::sys_days{ymd}.time_since_epoch().count()) * 86400.0;

  std::size_t pos = 10;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == 't' || s[pos] == ' ')) {
    const int hh = parse_digits(s, pos + 1, 2, raw);
    if (pos + 3 >= s.size() || s[pos + 3] != ':') throw Error(ErrorKind::Parse, "bad time in '" + raw + "'");
    const int mm = parse_digits(s, pos + 4, 2, raw);
    pos += 6;
    double sec = 0.0;
    if (pos < s.size() && s[pos] == ':') {
      std::size_t end = pos + 1;
      while (end < s.size() && (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.')) ++end;
      const auto v = parse_number(std::string_view(s).substr(pos + 1, end - pos - 1));
      if (!v) throw Error(ErrorKind::Parse, "bad seconds in '" + raw + "'");
      sec = *v;
      pos = end;
    }
    if (hh > 23 || mm > 59 || sec >= 61.0) throw Error(ErrorKind::Parse, "time out of range in '" + raw + "'");
    seconds += hh * 3600.0 + mm * 60.0 + sec;
  }
  if (pos < s.size()) {
    if ((s[pos] == 'Z' || s[pos] == 'z') && pos + 1 == s.size()) return seconds;
    if (s[pos] != '+' && s[pos] != '-') throw Error(ErrorKind::Parse, "unexpected text in timestamp '" + raw + "'");
    const int sign = s[pos] == '+' ? 1 : -1;
    const int oh = parse_digits(s, pos + 1, 2, raw);
    int om = 0;
    std::size_t next = pos + 3;
    if (next < s.size() && s[next] == ':') ++next;
    if (next < s.size()) {
      om = parse_digits(s, next, 2, raw);
      next += 2;
    }
    if (next != s.size()) throw Error(ErrorKind::Parse, "unexpected text in timestamp '" + raw + "'");
    seconds -= sign * (oh * 3600.0 + om * 60.0);
  }
  return seconds;
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

struct NumericRow {
  std::string entity, variable;
  double t, value;
  std::string where;
};

LoadResult<IrregularSeries> group_rows(std::vector<NumericRow> rows) {
  LoadResult<IrregularSeries> result;
  std::map<std::string, std::map<std::string, std::vector<NumericRow*>>> grouped;
  std::set<std::string> names;
  for (auto& r : rows) {
    grouped[r.entity][r.variable].push_back(&r);
    names.insert(r.variable);
  }
  for (auto& [entity, vars] : grouped) {
    IrregularSeries s;
    s.entity_id = entity;
    for (const auto& name : names) {
      Variable v{name, {}};
      auto it = vars.find(name);
      if (it != vars.end()) {
        auto& list = it->second;
        std::stable_sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->t < b->t; });
        for (std::size_t i = 0; i < list.size(); ++i) {
          if (i > 0 && list[i]->t == list[i - 1]->t)
            throw Error(ErrorKind::Ambiguity, "duplicate observation of '" + entity + "/" + name + "' at " +
                                                  format_double(list[i]->t) + " (" + list[i]->where + ")");
          v.observations.push_back({list[i]->t, list[i]->value});
        }
      }
      s.variables.push_back(std::move(v));
    }
    s.validate();
    result.items.push_back(std::move(s));
  }
  return result;
}

void read_numeric_rows(std::istream& in, const std::string& source, std::vector<NumericRow>& rows,
                       std::vector<std::string>& warnings) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      if (trim(line) != "entity_id,timestamp,variable,value")
        throw Error(ErrorKind::Parse, source + ":" + std::to_string(line_no) +
                                          ": expected header 'entity_id,timestamp,variable,value'");
      header_seen = true;
      continue;
    }
    if (trim(line).empty()) continue;
    const auto where = source + ":" + std::to_string(line_no);
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw Error(ErrorKind::Parse, where + ": expected 4 fields, got " + std::to_string(f.size()));
    NumericRow row;
    row.entity = trim(f[0]);
    row.variable = trim(f[2]);
    if (row.entity.empty() || row.variable.empty()) throw Error(ErrorKind::Parse, where + ": empty entity or variable");
    try {
      row.t = parse_timestamp(f[1]);
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, where + ": " + e.what());
    }
    const auto v = parse_number(trim(f[3]));
    if (!v || !std::isfinite(*v)) throw Error(ErrorKind::Parse, where + ": value '" + f[3] + "' is not a finite number");
    row.value = *v;
    row.where = where;
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw Error(ErrorKind::Parse, source + ": missing header");
  if (rows.empty()) warnings.push_back(source + ": no observations");
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Input, "cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

LoadResult<IrregularSeries> parse_numeric(std::istream& in, const std::string& source) {
  std::vector<NumericRow> rows;
  std::vector<std::string> warnings;
  read_numeric_rows(in, source, rows, warnings);
  auto result = group_rows(std::move(rows));
  result.warnings = std::move(warnings);
  return result;
}

LoadResult<IrregularSeries> load_numeric(const fs::path& path) {
  return load_numeric(std::vector<fs::path>{path});
}

LoadResult<IrregularSeries> load_numeric(const std::vector<fs::path>& paths) {
  std::vector<NumericRow> rows;
  std::vector<std::string> warnings;
  for (const auto& p : paths) {
    auto in = open_input(p);
    read_numeric_rows(in, p.string(), rows, warnings);
  }
  auto result = group_rows(std::move(rows));
  result.warnings = std::move(warnings);
  return result;
}

void write_numeric(std::ostream& out, const std::vector<IrregularSeries>& series) {
  out << "entity_id,timestamp,variable,value\n";
  for (const auto& s : series)
    for (const auto& v : s.variables)
      for (const auto& o : v.observations)
        out << csv_field(s.entity_id) << ',' << format_double(o.timestamp) << ',' << csv_field(v.name) << ','
            << format_double(o.value) << '\n';
}

// ---------------------------------------------------------------------------------------------
// Hash embedder

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

HashEmbedding hash_embed(const std::string& text, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorKind::Input, "embedding dimension must be positive");
  HashEmbedding out{std::vector<double>(dim, 0.0), true};
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = mix64(fnv1a(token) ^ mix64(seed));
    const double sign = (h >> 63) ? -1.0 : 1.0;
    out.values[static_cast<std::size_t>(h % dim)] += sign;
    out.empty = false;
    token.clear();
  };
  for (unsigned char c : text) {
    if (c >= 0x80 || std::isalnum(c)) {
      token.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else {
      flush();
    }
  }
  flush();
  double norm = 0.0;
  for (double x : out.values) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : out.values) x /= norm;
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Text JSONL

namespace {

double json_timestamp(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_timestamp(j.get<std::string>());
  throw Error(ErrorKind::Parse, where + ": timestamp must be a number or string");
}

void read_text_records(std::istream& in, std::size_t dim, const HashEmbedder* fallback, const std::string& source,
                       std::map<std::string, TextStream>& streams, std::vector<std::string>& warnings) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = source + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("entity_id") || !j.contains("timestamp"))
      throw Error(ErrorKind::Parse, where + ": record needs entity_id and timestamp");
    if (!j["entity_id"].is_string()) throw Error(ErrorKind::Parse, where + ": entity_id must be a string");

    TextRecord rec;
    try {
      rec.timestamp = json_timestamp(j["timestamp"], where);
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, where + ": " + e.what());
    }
    if (j.contains("embedding")) {
      const auto& e = j["embedding"];
      if (!e.is_array()) throw Error(ErrorKind::Parse, where + ": embedding must be an array");
      if (e.size() != dim)
        throw Error(ErrorKind::Shape, where + ": embedding has dimension " + std::to_string(e.size()) + ", expected " +
                                          std::to_string(dim));
      for (const auto& x : e) {
        if (!x.is_number() || !std::isfinite(x.get<double>()))
          throw Error(ErrorKind::Parse, where + ": embedding entries must be finite numbers");
        rec.embedding.push_back(x.get<double>());
      }
    } else if (j.contains("text")) {
      if (!fallback) throw Error(ErrorKind::Input, where + ": record has text but no embedding and no embedder is active");
      if (fallback->dim != dim) throw Error(ErrorKind::Shape, where + ": embedder dimension differs from expected dimension");
      auto emb = (*fallback)(j["text"].get<std::string>());
      if (emb.empty) warnings.push_back(where + ": empty text embedded as zero vector");
      rec.embedding = std::move(emb.values);
    } else {
      throw Error(ErrorKind::Parse, where + ": record has neither embedding nor text");
    }
    const auto id = j["entity_id"].get<std::string>();
    auto& stream = streams[id];
    stream.entity_id = id;
    stream.records.push_back(std::move(rec));
    ++count;
  }
  if (count == 0) warnings.push_back(source + ": no text records");
}

LoadResult<TextStream> finish_streams(std::map<std::string, TextStream> streams, std::vector<std::string> warnings) {
  LoadResult<TextStream> result;
  result.warnings = std::move(warnings);
  for (auto& [_, s] : streams) {
    std::stable_sort(s.records.begin(), s.records.end(),
                     [](const TextRecord& a, const TextRecord& b) { return a.timestamp < b.timestamp; });
    s.validate();
    result.items.push_back(std::move(s));
  }
  return result;
}

}  // namespace

LoadResult<TextStream> parse_text(std::istream& in, std::size_t dim, const HashEmbedder* fallback,
                                  const std::string& source) {
  if (dim == 0) throw Error(ErrorKind::Input, "expected embedding dimension must be positive");
  std::map<std::string, TextStream> streams;
  std::vector<std::string> warnings;
  read_text_records(in, dim, fallback, source, streams, warnings);
  return finish_streams(std::move(streams), std::move(warnings));
}

LoadResult<TextStream> load_text(const fs::path& path, std::size_t dim, const HashEmbedder* fallback) {
  return load_text(std::vector<fs::path>{path}, dim, fallback);
}

LoadResult<TextStream> load_text(const std::vector<fs::path>& paths, std::size_t dim, const HashEmbedder* fallback) {
  if (dim == 0) throw Error(ErrorKind::Input, "expected embedding dimension must be positive");
  std::map<std::string, TextStream> streams;
  std::vector<std::string> warnings;
  for (const auto& p : paths) {
    auto in = open_input(p);
    read_text_records(in, dim, fallback, p.string(), streams, warnings);
  }
  return finish_streams(std::move(streams), std::move(warnings));
}

void write_text(std::ostream& out, const std::vector<TextStream>& streams) {
  for (const auto& s : streams) {
    for (const auto& r : s.records) {
      ordered_json j;
      j["entity_id"] = s.entity_id;
      j["timestamp"] = r.timestamp;
      j["embedding"] = r.embedding;
      out << j.dump() << '\n';
    }
  }
}

// ---------------------------------------------------------------------------------------------
// Manifest

double parse_duration(const std::string& raw) {
  const std::string s = trim(raw);
  if (auto x = parse_number(s)) return *x;
  std::size_t split = 0;
  while (split < s.size() && (std::isdigit(static_cast<unsigned char>(s[split])) || s[split] == '.' ||
                              s[split] == 'e' || s[split] == 'E' || s[split] == '+' || s[split] == '-'))
    ++split;
  // "e" may start a unit name rather than an exponent
  while (split > 0 && (s[split - 1] == 'e' || s[split - 1] == 'E')) --split;
  const auto number = parse_number(s.substr(0, split));
  if (!number) throw Error(ErrorKind::Parse, "bad duration '" + raw + "'");
  return *number * seconds_per(parse_time_unit(trim(s.substr(split))));
}

std::optional<std::pair<double, double>> default_window(const std::string& dataset) {
  static const std::map<std::string, std::pair<double, double>> table = {
      {"gdelt", {14 * 86400.0, 14 * 86400.0}},       {"repohealth", {31 * 86400.0, 31 * 86400.0}},
      {"mimic", {24 * 3600.0, 24 * 3600.0}},         {"fnspid", {31 * 86400.0, 31 * 86400.0}},
      {"clustertrace", {12 * 3600.0, 12 * 3600.0}},  {"studentlife", {31 * 86400.0, 31 * 86400.0}},
      {"ilinet", {4 * 604800.0, 4 * 604800.0}},      {"cesnet", {7 * 86400.0, 7 * 86400.0}},
      {"epa-air", {7 * 86400.0, 7 * 86400.0}},
  };
  std::string key;
  for (char c : dataset) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  auto it = table.find(key);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

namespace {

double duration_field(const json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_duration(v.get<std::string>());
  throw Error(ErrorKind::Parse, "manifest field '" + key + "' must be a number of seconds or a duration string");
}

DatasetManifest parse_one_manifest(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::Parse, "manifest entry must be an object");
  DatasetManifest m;
  m.base_dir = base_dir;
  m.name = j.value("name", std::string("dataset"));
  if (!j.contains("numeric_glob")) throw Error(ErrorKind::Parse, "manifest '" + m.name + "' lacks numeric_glob");
  m.numeric_glob = j.at("numeric_glob").get<std::string>();
  m.text_glob = j.value("text_glob", std::string());
  m.unit = parse_time_unit(j.value("unit", std::string("seconds")));
  m.embedding_dim = j.value("embedding_dim", std::size_t{768});
  if (m.embedding_dim == 0) throw Error(ErrorKind::Input, "embedding_dim must be at least 1");

  const auto defaults = default_window(m.name);
  double context = defaults ? defaults->first : 0.0;
  double horizon = defaults ? defaults->second : 0.0;
  if (j.contains("context")) context = duration_field(j, "context");
  if (j.contains("horizon")) horizon = duration_field(j, "horizon");
  if (context <= 0.0 || horizon <= 0.0)
    throw Error(ErrorKind::Input, "manifest '" + m.name + "' needs positive context and horizon durations");
  m.window = WindowSpec::with_default_stride(context, horizon);
  if (j.contains("stride")) m.window.stride = duration_field(j, "stride");
  m.window.validate();

  if (j.contains("embedder")) m.embedder_seed = j["embedder"].value("seed", std::uint64_t{0});
  if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();

  if (j.contains("ttf")) {
    const auto& t = j["ttf"];
    if (t.contains("variant")) {
      m.model.ttf = parse_ttf_variant(t["variant"].get<std::string>());
      m.model.ttf_set = true;
    }
    m.model.sigma = t.value("sigma", m.model.sigma);
    m.model.time_dim = t.value("time_dim", m.model.time_dim);
  }
  if (j.contains("mmf")) {
    const auto& t = j["mmf"];
    if (t.contains("variant")) {
      m.model.mmf = parse_mmf_variant(t["variant"].get<std::string>());
      m.model.mmf_set = true;
    }
    m.model.kappa = t.value("kappa", m.model.kappa);
    m.model.hidden = t.value("hidden", m.model.hidden);
    m.model.heads = t.value("heads", m.model.heads);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    m.train.learning_rate = t.value("learning_rate", m.train.learning_rate);
    m.train.batch_size = t.value("batch_size", m.train.batch_size);
    m.train.patience = t.value("patience", m.train.patience);
    m.train.max_epochs = t.value("max_epochs", m.train.max_epochs);
  }
  return m;
}

}  // namespace

std::vector<DatasetManifest> parse_manifest(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("manifest: ") + e.what());
  }
  std::vector<DatasetManifest> out;
  try {
    if (j.is_object() && j.contains("datasets")) {
      for (const auto& d : j["datasets"]) out.push_back(parse_one_manifest(d, base_dir));
    } else {
      out.push_back(parse_one_manifest(j, base_dir));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("manifest: ") + e.what());
  }
  return out;
}

std::string read_file(const fs::path& path) {
  auto in = open_input(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<DatasetManifest> load_manifest(const fs::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

std::vector<fs::path> expand_glob(const fs::path& base_dir, const std::string& pattern) {
  fs::path pat(pattern);
  if (pat.is_relative()) pat = base_dir / pat;
  const fs::path dir = pat.parent_path().empty() ? fs::path(".") : pat.parent_path();
  const std::string name = pat.filename().string();
  std::vector<fs::path> out;
  if (name.find_first_of("*?[") == std::string::npos) {
    if (fs::exists(pat)) out.push_back(pat);
    return out;
  }
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (fnmatch(name.c_str(), entry.path().filename().c_str(), 0) == 0) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

LoadedDataset load_dataset(const DatasetManifest& m) {
  LoadedDataset out;
  out.dataset.name = m.name;
  out.dataset.window = m.window;
  out.dataset.unit = m.unit;
  out.dataset.text_dim = m.embedding_dim;

  const auto numeric_files = expand_glob(m.base_dir, m.numeric_glob);
  if (numeric_files.empty()) throw Error(ErrorKind::Input, "no numeric files match '" + m.numeric_glob + "'");
  auto numeric = load_numeric(numeric_files);
  out.warnings = numeric.warnings;

  std::map<std::string, TextStream> text_by_entity;
  if (!m.text_glob.empty()) {
    const auto text_files = expand_glob(m.base_dir, m.text_glob);
    if (text_files.empty()) throw Error(ErrorKind::Input, "no text files match '" + m.text_glob + "'");
    std::optional<HashEmbedder> embedder;
    if (m.embedder_seed) embedder = HashEmbedder{m.embedding_dim, *m.embedder_seed};
    auto text = load_text(text_files, m.embedding_dim, embedder ? &*embedder : nullptr);
    out.warnings.insert(out.warnings.end(), text.warnings.begin(), text.warnings.end());
    for (auto& s : text.items) text_by_entity[s.entity_id] = std::move(s);
  }

  for (auto& series : numeric.items) {
    EntityData e;
    e.text.entity_id = series.entity_id;
    if (auto it = text_by_entity.find(series.entity_id); it != text_by_entity.end()) {
      e.text = std::move(it->second);
      text_by_entity.erase(it);
    }
    e.series = std::move(series);
    out.dataset.entities.push_back(std::move(e));
  }
  for (const auto& [id, _] : text_by_entity) out.warnings.push_back("text for unknown entity '" + id + "' ignored");
  return out;
}

// ---------------------------------------------------------------------------------------------
// Checkpoints

std::string checkpoint_to_json(const Pipeline& pipeline, const CheckpointMeta& meta) {
  const auto& c = pipeline.config;
  ordered_json j;
  j["format"] = "immtsf-checkpoint/1";
  j["dataset"] = meta.dataset;
  j["training"] = {{"seed", meta.seed}, {"epochs_run", meta.epochs_run}, {"best_val_mse", meta.best_val_mse}};
  j["config"] = {{"length", c.length},   {"n_vars", c.n_vars},       {"text_dim", c.text_dim},
                 {"ttf", to_string(c.ttf)}, {"sigma", c.sigma},     {"time_dim", c.time_dim},
                 {"mmf", to_string(c.mmf)}, {"hidden", c.hidden},   {"kappa", c.kappa},
                 {"heads", c.heads},      {"bypass_empty_text", c.bypass_empty_text}};
  j["normalization"] = {{"mean", pipeline.normalization.mean}, {"stddev", pipeline.normalization.stddev}};
  ordered_json params = ordered_json::object();
  PipelineParams<double>::visit(pipeline.params, [&](const std::string& name, const auto& m) {
    if (m.size() == 0) return;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index col = 0; col < m.cols(); ++col) values.push_back(m(r, col));
    params[name] = {{"shape", {m.rows(), m.cols()}}, {"values", values}};
  });
  j["params"] = params;
  return j.dump(1);
}

std::pair<Pipeline, CheckpointMeta> checkpoint_from_json(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    if (j.value("format", std::string()) != "immtsf-checkpoint/1")
      throw Error(ErrorKind::Parse, "not an immtsf checkpoint");
    Pipeline p;
    CheckpointMeta meta;
    meta.dataset = j.value("dataset", std::string());
    const auto& t = j.at("training");
    meta.seed = t.at("seed").get<std::uint64_t>();
    meta.epochs_run = t.at("epochs_run").get<int>();
    meta.best_val_mse = t.at("best_val_mse").get<double>();

    const auto& c = j.at("config");
    p.config.length = c.at("length").get<Eigen::Index>();
    p.config.n_vars = c.at("n_vars").get<Eigen::Index>();
    p.config.text_dim = c.at("text_dim").get<Eigen::Index>();
    p.config.ttf = parse_ttf_variant(c.at("ttf").get<std::string>());
    p.config.sigma = c.at("sigma").get<double>();
    p.config.time_dim = c.at("time_dim").get<Eigen::Index>();
    p.config.mmf = parse_mmf_variant(c.at("mmf").get<std::string>());
    p.config.hidden = c.at("hidden").get<Eigen::Index>();
    p.config.kappa = c.at("kappa").get<double>();
    p.config.heads = c.at("heads").get<int>();
    p.config.bypass_empty_text = c.at("bypass_empty_text").get<bool>();
    p.normalization.mean = j.at("normalization").at("mean").get<std::vector<double>>();
    p.normalization.stddev = j.at("normalization").at("stddev").get<std::vector<double>>();

    p.params = init_pipeline<double>(p.config, 0);
    const auto& stored = j.at("params");
    std::size_t matched = 0;
    PipelineParams<double>::visit(p.params, [&](const std::string& name, auto& m) {
      if (m.size() == 0) return;
      if (!stored.contains(name)) throw Error(ErrorKind::Parse, "checkpoint lacks parameter '" + name + "'");
      const auto& entry = stored.at(name);
      const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      const auto values = entry.at("values").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols() ||
          values.size() != static_cast<std::size_t>(m.size()))
        throw Error(ErrorKind::Shape, "checkpoint parameter '" + name + "' has the wrong shape");
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index col = 0; col < m.cols(); ++col) m(r, col) = values[k++];
      ++matched;
    });
    if (matched != stored.size()) throw Error(ErrorKind::Parse, "checkpoint has unexpected parameters");
    return {std::move(p), meta};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("checkpoint: ") + e.what());
  }
}

}  // namespace immtsf::io
