#include "divrec/data/synthetic.hpp"

#include <algorithm>
#include <random>

#include "divrec/errors.hpp"

namespace divrec::data {

namespace {

const std::vector<std::string> kAdjectives = {"silent", "golden", "hidden", "broken", "distant",
                                              "little", "crimson", "endless", "quiet", "wild"};
const std::vector<std::string> kNouns = {"garden", "river",  "letter", "kingdom", "winter",
                                         "window", "island", "promise", "journey", "tower"};

std::string padded(const char* prefix, std::size_t n) {
  std::string digits = std::to_string(n);
  while (digits.size() < 4) digits.insert(digits.begin(), '0');
  return prefix + digits;
}

}  // namespace

const std::vector<std::string>& synthetic_categories() {
  static const std::vector<std::string> cats = {"fantasy", "mystery", "romance",
                                                "science", "history", "cooking"};
  return cats;
}

std::vector<SyntheticItem> synthetic_items(const SyntheticConfig& cfg) {
  const auto& cats = synthetic_categories();
  if (cfg.clusters == 0 || cfg.clusters > cats.size()) {
    throw ContractError("synthetic clusters must be in [1, " + std::to_string(cats.size()) + "]");
  }
  if (cfg.items < 2 * cfg.clusters) throw ContractError("synthetic catalog needs two items per cluster half");
  std::vector<SyntheticItem> items;
  const std::size_t per_cluster = cfg.items / cfg.clusters;
  for (std::size_t i = 0; i < cfg.items; ++i) {
    const std::size_t c = std::min(i / per_cluster, cfg.clusters - 1);
    const std::size_t j = i - c * per_cluster;
    const std::size_t half = j < per_cluster / 2 ? 0 : 1;
    // Adjective/noun choice ignores the half so titles carry no half signal.
    const std::size_t a = j % kAdjectives.size();
    const std::size_t n = (j + 3 * (j / kAdjectives.size()) + c) % kNouns.size();
    items.push_back({padded("i", i), "The " + kAdjectives[a] + " " + cats[c] + " " + kNouns[n], c, half});
  }
  return items;
}

std::vector<Interaction> generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.min_events > cfg.max_events) throw ContractError("synthetic min_events > max_events");
  const auto items = synthetic_items(cfg);
  std::vector<std::vector<std::size_t>> by_group(cfg.clusters * 2);
  for (std::size_t i = 0; i < items.size(); ++i) by_group[items[i].cluster * 2 + items[i].half].push_back(i);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> len(cfg.min_events, cfg.max_events);
  std::uniform_int_distribution<std::size_t> any(0, items.size() - 1);
  std::uniform_int_distribution<int> rating(1, 5);

  std::vector<Interaction> out;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    const std::size_t cluster = u % cfg.clusters;
    const std::size_t half = (u / cfg.clusters) % 2;
    const auto& own = by_group[cluster * 2 + half];
    const auto& sibling = by_group[cluster * 2 + 1 - half];
    const std::size_t n = len(rng);
    std::vector<bool> used(items.size(), false);
    std::int64_t ts = 1'600'000'000 + static_cast<std::int64_t>(u) * 1000;

    auto pick_from = [&](const std::vector<std::size_t>& pool) -> std::ptrdiff_t {
      std::vector<std::size_t> free;
      for (auto i : pool) {
        if (!used[i]) free.push_back(i);
      }
      if (free.empty()) return -1;
      return static_cast<std::ptrdiff_t>(free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)]);
    };

    for (std::size_t e = 0; e < n; ++e) {
      const double r = unit(rng);
      std::ptrdiff_t pick = -1;
      if (r < cfg.p_half) pick = pick_from(own);
      if (pick < 0 && r < cfg.p_half + cfg.p_cluster) pick = pick_from(sibling);
      if (pick < 0) {
        do {
          pick = static_cast<std::ptrdiff_t>(any(rng));
        } while (used[static_cast<std::size_t>(pick)]);
      }
      used[static_cast<std::size_t>(pick)] = true;
      const auto& item = items[static_cast<std::size_t>(pick)];
      int score = rating(rng);
      if (item.cluster == cluster) score = unit(rng) < 0.9 ? 5 : 4;
      ts += 60 + static_cast<std::int64_t>(unit(rng) * 3600);
      out.push_back({padded("u", u), item.item_id, score, ts, item.title});
    }
  }
  return out;
}

}  // namespace divrec::data
