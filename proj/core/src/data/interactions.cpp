#include "divrec/data/interactions.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "divrec/errors.hpp"
#include "divrec/util/hash.hpp"

namespace divrec::data {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_interaction(const std::string& line, Interaction& out) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    if (!j.is_object()) return false;
    out.user_id = j.at("user_id").is_string() ? j.at("user_id").get<std::string>()
                                              : j.at("user_id").dump();
    out.item_id = j.at("item_id").is_string() ? j.at("item_id").get<std::string>()
                                              : j.at("item_id").dump();
    if (!j.at("rating").is_number()) return false;
    const double r = j.at("rating").get<double>();
    if (r != static_cast<int>(r)) return false;
    out.rating = static_cast<int>(r);
    if (!j.at("timestamp").is_number_integer()) return false;
    out.timestamp = j.at("timestamp").get<std::int64_t>();
    out.title = trim(j.at("title").get<std::string>());
  } catch (const nlohmann::json::exception&) {
    return false;
  }
  return !out.user_id.empty() && !out.item_id.empty() && out.rating >= 1 && out.rating <= 5 &&
         out.timestamp >= 0 && !out.title.empty();
}

bool chrono_less(const Interaction& a, const Interaction& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  return a.item_id < b.item_id;
}

}  // namespace

IngestResult ingest_lines(const std::vector<std::string>& lines) {
  IngestResult result;
  for (const auto& raw : lines) {
    if (trim(raw).empty()) continue;
    ++result.total_lines;
    Interaction rec;
    if (parse_interaction(raw, rec)) {
      result.interactions.push_back(std::move(rec));
    } else {
      ++result.malformed;
    }
  }
  if (result.total_lines > 0 && result.malformed * 10 > result.total_lines) {
    throw IngestError(std::to_string(result.malformed) + " of " + std::to_string(result.total_lines) +
                      " lines malformed (limit 10%)");
  }
  return result;
}

IngestResult ingest(const std::filesystem::path& path, std::string_view format) {
  if (format != "jsonl") throw IngestError("unsupported interaction format '" + std::string(format) + "'");
  std::ifstream in(path);
  if (!in) throw IoError("cannot read interactions file " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  return ingest_lines(lines);
}

void write_interactions_jsonl(const std::filesystem::path& path,
                              const std::vector<Interaction>& interactions) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : interactions) {
    nlohmann::json j{{"user_id", r.user_id},
                     {"item_id", r.item_id},
                     {"rating", r.rating},
                     {"timestamp", r.timestamp},
                     {"title", r.title}};
    out << j.dump() << '\n';
  }
}

std::string truncate_title(std::string_view title, std::size_t max_tokens) {
  std::istringstream ss{std::string(title)};
  std::string word, out;
  for (std::size_t n = 0; n < max_tokens && ss >> word; ++n) {
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

std::vector<Interaction> filter_to_fixpoint(std::vector<Interaction> records, std::size_t min_user,
                                            std::size_t min_item, std::size_t* rounds) {
  std::size_t round = 0;
  for (bool changed = true; changed;) {
    changed = false;
    ++round;
    std::unordered_map<std::string, std::size_t> per_user;
    for (const auto& r : records) ++per_user[r.user_id];
    auto before = records.size();
    std::erase_if(records, [&](const Interaction& r) { return per_user[r.user_id] < min_user; });
    changed = changed || records.size() != before;

    std::unordered_map<std::string, std::size_t> per_item;
    for (const auto& r : records) ++per_item[r.item_id];
    before = records.size();
    std::erase_if(records, [&](const Interaction& r) { return per_item[r.item_id] < min_item; });
    changed = changed || records.size() != before;
  }
  if (rounds) *rounds = round;
  return records;
}

Dataset preprocess(const std::vector<Interaction>& interactions, const PreprocessConfig& cfg) {
  if (cfg.trunc_lo < 2) throw ContractError("trunc_lo must be at least 2 (history + target)");
  if (cfg.trunc_hi < cfg.trunc_lo) throw ContractError("trunc_hi must be >= trunc_lo");

  Dataset ds;
  ds.stats.input = interactions.size();

  std::unordered_map<std::string, std::set<std::string>> touched;
  for (const auto& r : interactions) touched[r.user_id].insert(r.item_id);

  std::vector<Interaction> positives;
  for (const auto& r : interactions) {
    if (r.rating == cfg.positive_rating) positives.push_back(r);
  }
  // One positive per (user, item): keep the earliest.
  std::stable_sort(positives.begin(), positives.end(), [](const auto& a, const auto& b) {
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return chrono_less(a, b);
  });
  {
    std::set<std::pair<std::string, std::string>> seen;
    std::erase_if(positives, [&](const Interaction& r) {
      return !seen.insert({r.user_id, r.item_id}).second;
    });
  }
  ds.stats.after_rating = positives.size();

  auto kept = filter_to_fixpoint(std::move(positives), cfg.min_user, cfg.min_item,
                                 &ds.stats.fixpoint_rounds);
  ds.stats.after_count_filter = kept.size();

  std::map<std::string, std::vector<Interaction>> by_user;
  for (auto& r : kept) {
    r.title = truncate_title(r.title, cfg.title_max_tokens);
    ds.catalog.try_emplace(r.item_id, r.title);
    by_user[r.user_id].push_back(r);
  }
  ds.stats.users_after_filter = by_user.size();
  ds.stats.items_after_filter = ds.catalog.size();

  for (auto& [user, recs] : by_user) {
    std::stable_sort(recs.begin(), recs.end(), chrono_less);
    if (recs.size() > cfg.trunc_hi) recs.erase(recs.begin(), recs.end() - static_cast<long>(cfg.trunc_hi));
    if (recs.size() < cfg.trunc_lo) continue;
    UserHistory h;
    h.user_id = user;
    for (const auto& r : recs) {
      h.items.push_back(r.item_id);
      h.titles.push_back(ds.catalog.at(r.item_id));
      h.timestamps.push_back(r.timestamp);
    }
    const auto& all = touched[user];
    h.all_items.assign(all.begin(), all.end());
    ds.histories.push_back(std::move(h));
  }
  ds.stats.users_kept = ds.histories.size();

  if (ds.histories.empty()) {
    throw PreprocessError("preprocessing removed every user: input=" + std::to_string(ds.stats.input) +
                          " after_rating=" + std::to_string(ds.stats.after_rating) +
                          " after_count_filter=" + std::to_string(ds.stats.after_count_filter) +
                          " users_after_filter=" + std::to_string(ds.stats.users_after_filter) +
                          " users_kept=0");
  }
  return ds;
}

std::vector<Candidate> candidates(const SplitSample& s) {
  std::vector<Candidate> out;
  out.push_back({s.target, s.target_title, 1});
  for (std::size_t i = 0; i < s.negatives.size(); ++i) {
    out.push_back({s.negatives[i], s.negative_titles.at(i), 0});
  }
  return out;
}

std::mt19937_64 user_rng(std::uint64_t seed, std::string_view user_id, std::uint64_t salt) {
  return std::mt19937_64(util::mix64(util::fnv1a(user_id) ^ util::mix64(seed) ^ util::mix64(salt + 0x51ed)));
}

std::vector<std::string> sample_negatives(const std::vector<std::string>& user_items,
                                          const Catalog& catalog, std::size_t n,
                                          std::mt19937_64& rng) {
  std::vector<std::string> pool;
  pool.reserve(catalog.size());
  for (const auto& [item, title] : catalog) {
    if (!std::binary_search(user_items.begin(), user_items.end(), item)) pool.push_back(item);
  }
  if (pool.size() < n) {
    throw SamplingError("only " + std::to_string(pool.size()) + " uninteracted items available, need " +
                        std::to_string(n) + " negatives (catalog " + std::to_string(catalog.size()) + ")");
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  return pool;
}

namespace {

SplitSample make_sample(const UserHistory& h, std::size_t target_index, const Catalog& catalog,
                        std::size_t n_neg, std::mt19937_64& rng) {
  SplitSample s;
  s.user_id = h.user_id;
  s.history.assign(h.items.begin(), h.items.begin() + static_cast<long>(target_index));
  s.history_titles.assign(h.titles.begin(), h.titles.begin() + static_cast<long>(target_index));
  s.target = h.items[target_index];
  s.target_title = h.titles[target_index];
  s.negatives = sample_negatives(h.all_items, catalog, n_neg, rng);
  for (const auto& n : s.negatives) s.negative_titles.push_back(catalog.at(n));
  return s;
}

}  // namespace

Split split_leave_one_out(const std::vector<UserHistory>& histories, const Catalog& catalog,
                          const SplitConfig& cfg) {
  Split split;
  const std::size_t first = std::max<std::size_t>(1, cfg.min_prefix);
  for (const auto& h : histories) {
    if (h.items.size() < 3) {
      throw ContractError("user " + h.user_id + " has " + std::to_string(h.items.size()) +
                          " interactions; leave-one-out needs at least 3");
    }
    auto rng = user_rng(cfg.seed, h.user_id);
    const std::size_t n = h.items.size();
    for (std::size_t j = first; j + 1 < n; ++j) {
      split.train.push_back(make_sample(h, j, catalog, cfg.n_negatives, rng));
    }
    split.test.push_back(make_sample(h, n - 1, catalog, cfg.n_negatives, rng));
  }
  return split;
}

void resample_negatives(std::vector<SplitSample>& samples, const std::vector<UserHistory>& histories,
                        const Catalog& catalog, std::uint64_t seed, std::uint64_t epoch) {
  std::unordered_map<std::string, const UserHistory*> by_user;
  for (const auto& h : histories) by_user[h.user_id] = &h;
  std::unordered_map<std::string, std::mt19937_64> rngs;
  for (auto& s : samples) {
    auto it = by_user.find(s.user_id);
    if (it == by_user.end()) throw ContractError("sample for unknown user " + s.user_id);
    auto [r, inserted] = rngs.try_emplace(s.user_id, user_rng(seed, s.user_id, epoch + 1));
    s.negatives = sample_negatives(it->second->all_items, catalog, s.negatives.size(), r->second);
    s.negative_titles.clear();
    for (const auto& n : s.negatives) s.negative_titles.push_back(catalog.at(n));
  }
}

void write_split_jsonl(const std::filesystem::path& path, const std::vector<SplitSample>& samples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : samples) {
    nlohmann::json j{{"user_id", s.user_id},
                     {"history", s.history},
                     {"history_titles", s.history_titles},
                     {"target", s.target},
                     {"target_title", s.target_title},
                     {"negatives", s.negatives},
                     {"negative_titles", s.negative_titles}};
    out << j.dump() << '\n';
  }
}

std::vector<SplitSample> read_split_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read split file " + path.string());
  std::vector<SplitSample> out;
  for (std::string line; std::getline(in, line);) {
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      SplitSample s;
      j.at("user_id").get_to(s.user_id);
      j.at("history").get_to(s.history);
      j.at("history_titles").get_to(s.history_titles);
      j.at("target").get_to(s.target);
      j.at("target_title").get_to(s.target_title);
      j.at("negatives").get_to(s.negatives);
      j.at("negative_titles").get_to(s.negative_titles);
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed split record in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace divrec::data
