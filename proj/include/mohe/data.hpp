#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mohe/errors.hpp"

namespace mohe {

struct ItemRecord {
    std::string id;
    std::string title;
    std::vector<std::string> genre_path; // root excluded, level-one path
    std::optional<std::string> shop_id;
    std::vector<std::string> tag_ids;
    std::vector<std::pair<std::string, std::string>> description_tokens; // (token, pos)
    bool purchased = false;
    bool added_to_cart = false;
};

enum class EventType { search, click, add_to_cart, purchase };

EventType event_type_from_string(std::string_view s);
std::string to_string(EventType t);

struct SessionEvent {
    std::int64_t ts = 0;
    EventType type = EventType::search;
    std::string query; // search events
    std::string item;  // click / add_to_cart / purchase events
};

struct SessionRecord {
    std::string session_id;
    std::string user;
    std::vector<SessionEvent> events; // timestamps non-decreasing
};

// One JSON record per line, UTF-8. Malformed lines are reported with their
// line number; parsing aborts once more than `error_budget` lines failed.
std::vector<ItemRecord> ingest_items(const std::filesystem::path& path,
                                     std::size_t error_budget = 0);
std::vector<SessionRecord> ingest_sessions(const std::filesystem::path& path,
                                           std::size_t error_budget = 0);

// Minimal id -> genre_path records ("provided labels" files share the item
// schema but only id and genre_path are required).
std::vector<std::pair<std::string, std::vector<std::string>>> ingest_labels(
    const std::filesystem::path& path, std::size_t error_budget = 0);

// Genre paths are rendered with '>' between node names.
std::string join_path(const std::vector<std::string>& path);
std::vector<std::string> truncate_path(const std::vector<std::string>& path,
                                       std::size_t level);

} // namespace mohe
