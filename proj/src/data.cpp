#include "mohe/data.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace mohe {

using nlohmann::json;

EventType event_type_from_string(std::string_view s) {
    if (s == "search") return EventType::search;
    if (s == "click") return EventType::click;
    if (s == "add_to_cart") return EventType::add_to_cart;
    if (s == "purchase") return EventType::purchase;
    throw InputError("unknown event type: " + std::string(s));
}

std::string to_string(EventType t) {
    switch (t) {
        case EventType::search: return "search";
        case EventType::click: return "click";
        case EventType::add_to_cart: return "add_to_cart";
        case EventType::purchase: return "purchase";
    }
    return "search";
}

namespace {

// Applies `parse` per non-empty line, collecting per-line errors until the
// budget is exceeded.
template <typename T, typename Parse>
std::vector<T> ingest_lines(const std::filesystem::path& path,
                            std::size_t error_budget, Parse parse) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<T> out;
    std::vector<std::string> errors;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(parse(line));
        } catch (const std::exception& e) {
            errors.push_back("line " + std::to_string(lineno) + ": " + e.what());
            if (errors.size() > error_budget) {
                std::ostringstream msg;
                msg << path.string() << ": " << errors.size()
                    << " malformed record(s), budget " << error_budget << "\n";
                for (const std::string& err : errors) msg << "  " << err << "\n";
                throw InputError(msg.str());
            }
        }
    }
    return out;
}

std::string require_string(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_string())
        throw InputError(std::string("missing required field: ") + field);
    return j[field].get<std::string>();
}

std::vector<std::string> require_string_array(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_array() || j[field].empty())
        throw InputError(std::string("missing required field: ") + field);
    std::vector<std::string> out;
    for (const auto& v : j[field]) {
        if (!v.is_string())
            throw InputError(std::string(field) + " must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

ItemRecord parse_item(const json& j) {
    ItemRecord r;
    r.id = require_string(j, "id");
    r.title = require_string(j, "title");
    r.genre_path = require_string_array(j, "genre_path");
    if (j.contains("shop_id")) r.shop_id = j["shop_id"].get<std::string>();
    if (j.contains("tag_ids"))
        for (const auto& t : j["tag_ids"]) r.tag_ids.push_back(t.get<std::string>());
    if (j.contains("description_tokens"))
        for (const auto& p : j["description_tokens"]) {
            if (!p.is_array() || p.size() != 2)
                throw InputError("description_tokens entries must be [token, pos]");
            r.description_tokens.emplace_back(p[0].get<std::string>(),
                                              p[1].get<std::string>());
        }
    if (j.contains("purchased")) r.purchased = j["purchased"].get<bool>();
    if (j.contains("added_to_cart"))
        r.added_to_cart = j["added_to_cart"].get<bool>();
    return r;
}

} // namespace

std::vector<ItemRecord> ingest_items(const std::filesystem::path& path,
                                     std::size_t error_budget) {
    auto items = ingest_lines<ItemRecord>(path, error_budget, [](const std::string& line) {
        return parse_item(json::parse(line));
    });
    std::vector<std::string> ids;
    ids.reserve(items.size());
    for (const ItemRecord& r : items) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw InputError(path.string() + ": duplicate item id");
    return items;
}

std::vector<SessionRecord> ingest_sessions(const std::filesystem::path& path,
                                           std::size_t error_budget) {
    return ingest_lines<SessionRecord>(path, error_budget, [](const std::string& line) {
        const json j = json::parse(line);
        SessionRecord r;
        r.session_id = require_string(j, "session_id");
        if (j.contains("user")) r.user = j["user"].get<std::string>();
        if (!j.contains("events") || !j["events"].is_array())
            throw InputError("missing required field: events");
        std::int64_t prev_ts = std::numeric_limits<std::int64_t>::min();
        for (const auto& ej : j["events"]) {
            SessionEvent e;
            e.ts = ej.value("ts", std::int64_t{0});
            e.type = event_type_from_string(require_string(ej, "type"));
            if (e.ts < prev_ts)
                throw InputError("event timestamps must be non-decreasing");
            prev_ts = e.ts;
            if (e.type == EventType::search) {
                e.query = require_string(ej, "query");
            } else {
                e.item = require_string(ej, "item");
            }
            r.events.push_back(std::move(e));
        }
        return r;
    });
}

std::vector<std::pair<std::string, std::vector<std::string>>> ingest_labels(
    const std::filesystem::path& path, std::size_t error_budget) {
    using Pair = std::pair<std::string, std::vector<std::string>>;
    return ingest_lines<Pair>(path, error_budget, [](const std::string& line) {
        const json j = json::parse(line);
        return Pair{require_string(j, "id"), require_string_array(j, "genre_path")};
    });
}

std::string join_path(const std::vector<std::string>& path) {
    std::string out;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i) out += '>';
        out += path[i];
    }
    return out;
}

std::vector<std::string> truncate_path(const std::vector<std::string>& path,
                                       std::size_t level) {
    if (path.size() <= level) return path;
    return {path.begin(), path.begin() + static_cast<std::ptrdiff_t>(level)};
}

} // namespace mohe
