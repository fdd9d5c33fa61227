#include "cfrec/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace cfrec {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Splits a `::`-separated MovieLens .dat line.
std::vector<std::string> split_dat(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find("::", pos);
    if (next == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, next - pos));
    pos = next + 2;
  }
  return fields;
}

// CSV fields, honoring double quotes (MovieLens movie titles contain commas).
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::vector<std::string> split_tsv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find('\t', pos);
    if (next == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return fields;
}

std::vector<std::string> split_fields(const std::string& line, FileFormat format) {
  switch (format) {
    case FileFormat::kMovieLensDat:
      return split_dat(line);
    case FileFormat::kMovieLensCsv:
      return split_csv(line);
    case FileFormat::kCanonical:
      return split_tsv(line);
  }
  return {};
}

[[noreturn]] void line_error(const std::string& path, std::size_t line_no,
                             const std::string& what) {
  std::ostringstream os;
  os << path << ":" << line_no << ": " << what;
  throw Error::data(os.str());
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t consumed = 0;
    out = std::stod(s, &consumed);
    return consumed == s.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::data("cannot open " + path);
  return in;
}

// Strips a trailing '\r' so CRLF exports parse cleanly.
bool get_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

bool looks_like_header(const std::vector<std::string>& fields) {
  if (fields.size() < 3) return false;
  double tmp;
  return !parse_double(fields[2], tmp);
}

}  // namespace

FileFormat format_from_name(const std::string& name) {
  std::string n = lowercase(trim(name));
  if (n == "dat" || n == "movielens-dat") return FileFormat::kMovieLensDat;
  if (n == "csv" || n == "movielens-csv") return FileFormat::kMovieLensCsv;
  if (n == "canonical" || n == "tsv") return FileFormat::kCanonical;
  throw Error::usage("unknown file format '" + name + "' (expected dat, csv or canonical)");
}

std::optional<FileFormat> guess_format(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return std::nullopt;
  std::string ext = lowercase(path.substr(dot + 1));
  if (ext == "dat") return FileFormat::kMovieLensDat;
  if (ext == "csv") return FileFormat::kMovieLensCsv;
  if (ext == "tsv") return FileFormat::kCanonical;
  return std::nullopt;
}

RatingsData parse_ratings(const std::string& path, FileFormat format,
                          std::optional<RatingScale> scale) {
  std::ifstream in = open_or_throw(path);
  RatingsData data;
  std::vector<RatingTriplet> triplets;
  bool half_stars = false;
  double min_seen = 0.0, max_seen = 0.0;

  std::string line;
  std::size_t line_no = 0;
  while (get_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line, format);
    if (line_no == 1 && format == FileFormat::kMovieLensCsv && looks_like_header(fields)) {
      continue;  // `userId,movieId,rating,timestamp`
    }
    if (fields.size() < 3) line_error(path, line_no, "expected user, item and rating fields");
    double value;
    if (!parse_double(trim(fields[2]), value)) {
      line_error(path, line_no, "cannot parse rating '" + fields[2] + "'");
    }
    std::uint32_t u = data.users.intern(trim(fields[0]));
    std::uint32_t i = data.items.intern(trim(fields[1]));
    triplets.push_back({u, i, value});
    if (value != std::floor(value)) half_stars = true;
    if (triplets.size() == 1) {
      min_seen = max_seen = value;
    } else {
      min_seen = std::min(min_seen, value);
      max_seen = std::max(max_seen, value);
    }
  }
  if (triplets.empty()) throw Error::data(path + ": no ratings found");

  if (scale) {
    data.scale = *scale;
  } else if (half_stars || min_seen < 1.0) {
    data.scale = {0.5, 5.0};
  } else {
    data.scale = {1.0, 5.0};
  }
  if (min_seen < data.scale.min_rating || max_seen > data.scale.max_rating) {
    std::ostringstream os;
    os << path << ": observed ratings [" << min_seen << ", " << max_seen
       << "] exceed scale [" << data.scale.min_rating << ", " << data.scale.max_rating << "]";
    throw Error::data(os.str());
  }

  data.ratings = SparseRatings::from_triplets(data.users.size(), data.items.size(),
                                              Orientation::kUserRows, std::move(triplets));
  return data;
}

TagMatrix parse_tags(const std::string& path, FileFormat format, IdMap& items) {
  std::ifstream in = open_or_throw(path);
  TagMatrix out;
  // (item, tag) -> count accumulated before the rows are materialized.
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> counts;
  std::size_t unseen = 0;

  std::string line;
  std::size_t line_no = 0;
  while (get_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line, format);
    std::string item_id, tag_text;
    if (format == FileFormat::kCanonical) {
      if (fields.size() < 2) line_error(path, line_no, "expected item and tag fields");
      item_id = trim(fields[0]);
      tag_text = fields[1];
    } else {
      // MovieLens tag files carry user::item::tag[::timestamp].
      if (line_no == 1 && format == FileFormat::kMovieLensCsv && fields.size() >= 3 &&
          lowercase(trim(fields[1])) == "movieid") {
        continue;
      }
      if (fields.size() < 3) line_error(path, line_no, "expected user, item and tag fields");
      item_id = trim(fields[1]);
      tag_text = fields[2];
    }
    std::string tag = lowercase(trim(tag_text));
    if (tag.empty()) continue;
    if (!items.find(item_id)) ++unseen;
    std::uint32_t item = items.intern(item_id);
    std::uint32_t tag_idx = out.tags.intern(tag);
    ++counts[{item, tag_idx}];
  }
  if (unseen > 0) {
    warn(std::to_string(unseen) + " tagged item(s) in " + path +
         " were not present in the ratings; rows added");
  }
  out.n_entities = items.size();
  out.rows.assign(out.n_entities, {});
  for (const auto& [key, count] : counts) {
    out.rows[key.first].push_back({key.second, count});
  }
  return out;
}

CategoryMatrix parse_categories(const std::string& path, FileFormat format, IdMap& items) {
  std::ifstream in = open_or_throw(path);
  CategoryMatrix out;
  std::map<std::uint32_t, std::vector<std::uint32_t>> rows;
  std::size_t unseen = 0;

  std::string line;
  std::size_t line_no = 0;
  while (get_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line, format);
    if (line_no == 1 && format == FileFormat::kMovieLensCsv && fields.size() >= 2 &&
        lowercase(trim(fields[0])) == "movieid") {
      continue;
    }
    if (fields.size() < 2) line_error(path, line_no, "expected item and category fields");
    // MovieLens movie files are id::title::genres; canonical is id<TAB>genres.
    const std::string& genre_field = fields.back();
    std::string item_id = trim(fields[0]);
    if (!items.find(item_id)) ++unseen;
    std::uint32_t item = items.intern(item_id);
    auto& cats = rows[item];
    std::stringstream ss(genre_field);
    std::string token;
    while (std::getline(ss, token, '|')) {
      token = trim(token);
      if (token.empty() || lowercase(token) == "(no genres listed)") continue;
      cats.push_back(out.categories.intern(token));
    }
  }
  if (unseen > 0) {
    warn(std::to_string(unseen) + " item(s) in " + path +
         " were not present in the ratings; rows added");
  }
  out.n_entities = items.size();
  out.rows.assign(out.n_entities, {});
  for (auto& [item, cats] : rows) {
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    out.rows[item] = std::move(cats);
  }
  return out;
}

Demographics parse_demographics(const std::string& path, FileFormat format, IdMap& users) {
  std::ifstream in = open_or_throw(path);
  Demographics out;
  struct Record {
    std::string gender;
    double age = 0.0;
    bool age_known = false;
    std::string occupation;
  };
  std::map<std::uint32_t, Record> records;
  std::size_t unseen = 0;

  std::string line;
  std::size_t line_no = 0;
  while (get_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line, format);
    if (line_no == 1 && format == FileFormat::kMovieLensCsv && fields.size() >= 2 &&
        lowercase(trim(fields[0])) == "userid") {
      continue;
    }
    if (fields.size() < 4) {
      line_error(path, line_no, "expected user, gender, age and occupation fields");
    }
    std::string user_id = trim(fields[0]);
    if (!users.find(user_id)) ++unseen;
    std::uint32_t user = users.intern(user_id);
    Record rec;
    rec.gender = lowercase(trim(fields[1]));
    rec.age_known = parse_double(trim(fields[2]), rec.age);
    rec.occupation = trim(fields[3]);
    records[user] = std::move(rec);
  }
  if (unseen > 0) {
    warn(std::to_string(unseen) + " user(s) in " + path +
         " were not present in the ratings; rows added");
  }

  out.n_users = users.size();
  out.gender.n_entities = out.n_users;
  out.gender.rows.assign(out.n_users, {});
  out.occupation.n_entities = out.n_users;
  out.occupation.rows.assign(out.n_users, {});
  out.age.assign(out.n_users, 0.0);
  out.age_known.assign(out.n_users, false);
  for (const auto& [user, rec] : records) {
    if (!rec.gender.empty()) out.gender.rows[user] = {out.gender.categories.intern(rec.gender)};
    if (!rec.occupation.empty()) {
      out.occupation.rows[user] = {out.occupation.categories.intern(rec.occupation)};
    }
    out.age[user] = rec.age;
    out.age_known[user] = rec.age_known;
  }
  return out;
}

void write_canonical_ratings(const std::string& path, const SparseRatings& normalized,
                             const RatingScale& scale, const IdMap& row_ids,
                             const IdMap& col_ids) {
  std::ofstream outf(path);
  if (!outf) throw Error::data("cannot write " + path);
  char buf[64];
  normalized.for_each([&](std::size_t i, std::uint32_t j, double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", scale.from_unit(v));
    outf << row_ids.id(static_cast<std::uint32_t>(i)) << '\t' << col_ids.id(j) << '\t'
         << buf << '\n';
  });
  if (!outf) throw Error::data("failed writing " + path);
}

void write_id_map(const std::string& path, const IdMap& map) {
  std::ofstream outf(path);
  if (!outf) throw Error::data("cannot write " + path);
  for (std::uint32_t i = 0; i < map.size(); ++i) {
    outf << map.id(i) << '\t' << i << '\n';
  }
  if (!outf) throw Error::data("failed writing " + path);
}

IdMap read_id_map(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  IdMap map;
  std::string line;
  std::size_t line_no = 0;
  while (get_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_tsv(line);
    if (fields.size() != 2) line_error(path, line_no, "expected `entity<TAB>index`");
    std::uint32_t got = map.intern(fields[0]);
    if (std::to_string(got) != trim(fields[1])) {
      line_error(path, line_no, "index mismatch for entity '" + fields[0] + "'");
    }
  }
  return map;
}

}  // namespace cfrec
