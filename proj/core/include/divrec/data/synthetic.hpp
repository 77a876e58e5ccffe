#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divrec/data/interactions.hpp"

namespace divrec::data {

// Planted-affinity interaction log. Items belong to a category cluster whose
// word appears in every title; each cluster is split into two halves that
// only show up in who-bought-what, never in the text.
struct SyntheticConfig {
  std::size_t users = 200;
  std::size_t items = 120;
  std::size_t clusters = 6;
  std::size_t min_events = 12;
  std::size_t max_events = 18;
  double p_half = 0.6;     // pick from the user's own half
  double p_cluster = 0.25; // pick from the other half of the same cluster
  std::uint64_t seed = 2024;
};

struct SyntheticItem {
  std::string item_id;
  std::string title;
  std::size_t cluster = 0;
  std::size_t half = 0;
};

const std::vector<std::string>& synthetic_categories();

std::vector<SyntheticItem> synthetic_items(const SyntheticConfig& cfg);
std::vector<Interaction> generate_synthetic(const SyntheticConfig& cfg);

}  // namespace divrec::data
