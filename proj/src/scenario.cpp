#include "dynoloc/scenario.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dynoloc {

namespace {

struct Value {
    enum class Kind { Number, String, Boolean, NumberList, PointList } kind;
    double number = 0.0;
    std::string string;
    bool boolean = false;
    std::vector<double> numbers;
    std::vector<Point2> points;
    int line = 0;
};

struct Table {
    std::map<std::string, Value> entries;
    int line = 0;
};

struct Document {
    std::map<std::string, Table> singles;             // [arena], [radio], [run]
    std::map<std::string, std::vector<Table>> arrays; // [[walls]], [[nodes]]
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    std::ostringstream os;
    os << origin << ":" << line << ": " << msg;
    throw std::runtime_error(os.str());
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& tok, double& out) {
    try {
        std::size_t used = 0;
        out = std::stod(tok, &used);
        return used == tok.size();
    } catch (...) {
        return false;
    }
}

Value parse_value(const std::string& raw, const std::string& origin, int line) {
    Value v;
    v.line = line;
    const std::string s = trim(raw);
    if (s.empty()) fail(origin, line, "missing value");

    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"') fail(origin, line, "unterminated string");
        v.kind = Value::Kind::String;
        v.string = s.substr(1, s.size() - 2);
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = Value::Kind::Boolean;
        v.boolean = s == "true";
        return v;
    }
    if (s.front() == '[') {
        if (s.back() != ']') fail(origin, line, "unterminated array");
        const std::string inner = trim(s.substr(1, s.size() - 2));
        if (inner.find('[') != std::string::npos) {
            // array of [x, y] pairs
            v.kind = Value::Kind::PointList;
            std::size_t pos = 0;
            while (pos < inner.size()) {
                const std::size_t open = inner.find('[', pos);
                if (open == std::string::npos) break;
                const std::size_t close = inner.find(']', open);
                if (close == std::string::npos) fail(origin, line, "unterminated point");
                std::stringstream ss(inner.substr(open + 1, close - open - 1));
                std::string xs, ys;
                if (!std::getline(ss, xs, ',') || !std::getline(ss, ys))
                    fail(origin, line, "point needs two coordinates");
                Point2 p;
                if (!parse_number(trim(xs), p.x) || !parse_number(trim(ys), p.y))
                    fail(origin, line, "invalid point coordinate");
                v.points.push_back(p);
                pos = close + 1;
            }
            if (v.points.empty()) fail(origin, line, "empty point list");
            return v;
        }
        v.kind = Value::Kind::NumberList;
        std::stringstream ss(inner);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            double d;
            if (!parse_number(trim(tok), d)) fail(origin, line, "invalid number in array");
            v.numbers.push_back(d);
        }
        if (v.numbers.empty()) fail(origin, line, "empty array");
        return v;
    }
    double d;
    if (!parse_number(s, d)) fail(origin, line, "invalid value '" + s + "'");
    v.kind = Value::Kind::Number;
    v.number = d;
    return v;
}

Document parse_document(const std::string& text, const std::string& origin) {
    Document doc;
    Table* current = nullptr;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        const std::size_t hash = s.find('#');
        if (hash != std::string::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;

        if (s.size() > 4 && s.substr(0, 2) == "[[" && s.substr(s.size() - 2) == "]]") {
            const std::string name = trim(s.substr(2, s.size() - 4));
            doc.arrays[name].push_back(Table{{}, line});
            current = &doc.arrays[name].back();
            continue;
        }
        if (s.front() == '[' && s.back() == ']') {
            const std::string name = trim(s.substr(1, s.size() - 2));
            auto [it, inserted] = doc.singles.try_emplace(name, Table{{}, line});
            if (!inserted) fail(origin, line, "duplicate section [" + name + "]");
            current = &it->second;
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) fail(origin, line, "expected key = value");
        if (!current) fail(origin, line, "key outside of any section");
        const std::string key = trim(s.substr(0, eq));
        if (key.empty()) fail(origin, line, "empty key");
        if (current->entries.count(key)) fail(origin, line, "duplicate key '" + key + "'");
        current->entries[key] = parse_value(s.substr(eq + 1), origin, line);
    }
    return doc;
}

class TableReader {
public:
    TableReader(const Table& t, std::string path, const std::string& origin)
        : table_(t), path_(std::move(path)), origin_(origin) {}

    double number(const std::string& key, std::optional<double> fallback = {}) const {
        const Value* v = find(key, fallback.has_value());
        if (!v) return *fallback;
        if (v->kind != Value::Kind::Number)
            fail(origin_, v->line, path_ + "." + key + " must be a number");
        return v->number;
    }
    bool boolean(const std::string& key, bool fallback) const {
        const Value* v = find(key, true);
        if (!v) return fallback;
        if (v->kind != Value::Kind::Boolean)
            fail(origin_, v->line, path_ + "." + key + " must be true or false");
        return v->boolean;
    }
    std::string string(const std::string& key, std::optional<std::string> fallback = {}) const {
        const Value* v = find(key, fallback.has_value());
        if (!v) return *fallback;
        if (v->kind != Value::Kind::String)
            fail(origin_, v->line, path_ + "." + key + " must be a string");
        return v->string;
    }
    Point2 point(const std::string& key) const {
        const Value* v = find(key, false);
        if (v->kind == Value::Kind::NumberList && v->numbers.size() == 2)
            return {v->numbers[0], v->numbers[1]};
        fail(origin_, v->line, path_ + "." + key + " must be [x, y]");
    }
    std::vector<Point2> points(const std::string& key) const {
        const Value* v = find(key, true);
        if (!v) return {};
        if (v->kind == Value::Kind::PointList) return v->points;
        if (v->kind == Value::Kind::NumberList && v->numbers.size() == 2)
            return {{v->numbers[0], v->numbers[1]}};
        fail(origin_, v->line, path_ + "." + key + " must be a list of [x, y] points");
    }
    bool has(const std::string& key) const { return table_.entries.count(key) > 0; }
    int line() const { return table_.line; }

    void check_known(const std::set<std::string>& known) const {
        for (const auto& [key, value] : table_.entries)
            if (!known.count(key))
                fail(origin_, value.line, path_ + "." + key + " is not a recognized field");
    }

private:
    const Value* find(const std::string& key, bool optional) const {
        auto it = table_.entries.find(key);
        if (it == table_.entries.end()) {
            if (optional) return nullptr;
            fail(origin_, table_.line, path_ + "." + key + " is required");
        }
        return &it->second;
    }
    const Table& table_;
    std::string path_;
    const std::string& origin_;
};

} // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    const Document doc = parse_document(text, origin);
    Scenario s;

    for (const auto& [name, table] : doc.singles)
        if (name != "arena" && name != "radio" && name != "run")
            fail(origin, table.line, "unknown section [" + name + "]");
    for (const auto& [name, tables] : doc.arrays)
        if (name != "walls" && name != "nodes")
            fail(origin, tables.front().line, "unknown section [[" + name + "]]");

    if (doc.singles.count("arena")) {
        TableReader arena(doc.singles.at("arena"), "arena", origin);
        arena.check_known({"width", "height"});
        s.arena_width = arena.number("width", s.arena_width);
        s.arena_height = arena.number("height", s.arena_height);
    }

    if (doc.arrays.count("walls")) {
        for (std::size_t i = 0; i < doc.arrays.at("walls").size(); ++i) {
            TableReader wall(doc.arrays.at("walls")[i],
                             "walls[" + std::to_string(i) + "]", origin);
            wall.check_known({"from", "to"});
            s.walls.push_back({wall.point("from"), wall.point("to")});
        }
    }

    if (doc.arrays.count("nodes")) {
        for (std::size_t i = 0; i < doc.arrays.at("nodes").size(); ++i) {
            TableReader node(doc.arrays.at("nodes")[i],
                             "nodes[" + std::to_string(i) + "]", origin);
            node.check_known({"id", "position", "waypoints", "speed", "reference", "heading"});
            NodeSpec spec;
            spec.id = static_cast<NodeId>(node.number("id"));
            spec.position = node.point("position");
            spec.waypoints = node.points("waypoints");
            spec.speed = node.number("speed", 0.0);
            spec.is_reference = node.boolean("reference", false);
            if (node.has("heading")) spec.heading = node.number("heading");
            s.nodes.push_back(std::move(spec));
        }
    }

    if (doc.singles.count("radio")) {
        TableReader radio(doc.singles.at("radio"), "radio", origin);
        radio.check_known({"los_max_range", "nlos_base_range", "per_wall_range_penalty",
                           "los_sigma", "los_bias", "nlos_bias_mean_per_wall",
                           "nlos_bias_base", "bias_cap", "slot_time_low_rate_ms",
                           "slot_time_high_rate_ms", "clock_ppm_max", "data_rate"});
        ChannelParams& p = s.radio;
        p.los_max_range = radio.number("los_max_range", p.los_max_range);
        p.nlos_base_range = radio.number("nlos_base_range", p.nlos_base_range);
        p.per_wall_range_penalty =
            radio.number("per_wall_range_penalty", p.per_wall_range_penalty);
        p.los_sigma = radio.number("los_sigma", p.los_sigma);
        p.los_bias = radio.number("los_bias", p.los_bias);
        p.nlos_bias_mean_per_wall =
            radio.number("nlos_bias_mean_per_wall", p.nlos_bias_mean_per_wall);
        p.nlos_bias_base = radio.number("nlos_bias_base", p.nlos_bias_base);
        p.bias_cap = radio.number("bias_cap", p.bias_cap);
        p.slot_time_low_rate_ms =
            radio.number("slot_time_low_rate_ms", p.slot_time_low_rate_ms);
        p.slot_time_high_rate_ms =
            radio.number("slot_time_high_rate_ms", p.slot_time_high_rate_ms);
        p.clock_ppm_max = radio.number("clock_ppm_max", p.clock_ppm_max);
        const std::string rate = radio.string("data_rate", std::string("low"));
        if (rate == "low") s.slot_time_ms = p.slot_time_low_rate_ms;
        else if (rate == "high") s.slot_time_ms = p.slot_time_high_rate_ms;
        else fail(origin, radio.line(), "radio.data_rate must be \"low\" or \"high\"");
    }

    if (doc.singles.count("run")) {
        TableReader run(doc.singles.at("run"), "run", origin);
        run.check_known({"refresh_rate", "strategy", "seed", "epochs",
                         "heading_noise_sigma", "use_link_quality", "wifi_overhead_ms",
                         "interference_range", "smoothing_window", "name"});
        s.refresh_rate_hz = run.number("refresh_rate", s.refresh_rate_hz);
        const std::string strat = run.string("strategy", to_string(s.strategy));
        try {
            s.strategy = strategy_from_string(strat);
        } catch (const std::invalid_argument& e) {
            fail(origin, run.line(), std::string("run.strategy: ") + e.what());
        }
        s.seed = static_cast<std::uint64_t>(run.number("seed", static_cast<double>(s.seed)));
        s.epochs = static_cast<int>(run.number("epochs", s.epochs));
        s.heading_noise_sigma_deg =
            run.number("heading_noise_sigma", s.heading_noise_sigma_deg);
        s.use_link_quality = run.boolean("use_link_quality", s.use_link_quality);
        s.wifi_overhead_ms = run.number("wifi_overhead_ms", s.wifi_overhead_ms);
        s.interference_range = run.number("interference_range", s.interference_range);
        s.smoothing_window = static_cast<int>(run.number("smoothing_window", s.smoothing_window));
        s.name = run.string("name", s.name);
    }

    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str(), path);
}

std::vector<ValidationIssue> validate_scenario(const Scenario& s) {
    std::vector<ValidationIssue> issues;
    auto add = [&issues](std::string field, std::string msg) {
        issues.push_back({std::move(field), std::move(msg)});
    };

    if (s.arena_width <= 0.0) add("arena.width", "must be positive");
    if (s.arena_height <= 0.0) add("arena.height", "must be positive");
    if (s.nodes.empty()) add("nodes", "at least one node required");
    if (s.epochs < 1) add("run.epochs", "must be >= 1");
    if (s.refresh_rate_hz <= 0.0) add("run.refresh_rate", "must be positive");
    if (s.heading_noise_sigma_deg < 0.0) add("run.heading_noise_sigma", "must be >= 0");
    if (s.slot_time_ms <= 0.0) add("radio.slot_time", "must be positive");
    if (s.smoothing_window < 1) add("run.smoothing_window", "must be >= 1");
    if (!s.radio.valid()) add("radio", "channel parameters out of range");

    std::map<NodeId, std::size_t> first_seen;
    int references = 0;
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        const NodeSpec& n = s.nodes[i];
        const std::string prefix = "nodes[" + std::to_string(i) + "]";
        auto [it, inserted] = first_seen.try_emplace(n.id, i);
        if (!inserted)
            add(prefix + ".id",
                "duplicates nodes[" + std::to_string(it->second) + "].id");
        if (n.speed < 0.0 || n.speed > 3.0)
            add(prefix + ".speed", "must be within [0, 3] m/s");
        if (!std::isfinite(n.position.x) || !std::isfinite(n.position.y))
            add(prefix + ".position", "must be finite");
        if (n.speed > 0.0 && n.waypoints.size() < 2)
            add(prefix + ".waypoints", "moving node needs at least 2 waypoints");
        if (n.is_reference) ++references;
    }
    if (references > 1) add("nodes", "at most one reference node allowed");

    for (std::size_t i = 0; i < s.walls.size(); ++i) {
        const WallSegment& w = s.walls[i];
        if (!std::isfinite(w.a.x) || !std::isfinite(w.a.y) || !std::isfinite(w.b.x) ||
            !std::isfinite(w.b.y))
            add("walls[" + std::to_string(i) + "]", "must be finite");
    }
    return issues;
}

std::string scenario_to_text(const Scenario& s) {
    std::ostringstream os;
    os.precision(12);
    os << "[arena]\n"
       << "width = " << s.arena_width << "\n"
       << "height = " << s.arena_height << "\n\n";
    for (const WallSegment& w : s.walls) {
        os << "[[walls]]\n"
           << "from = [" << w.a.x << ", " << w.a.y << "]\n"
           << "to = [" << w.b.x << ", " << w.b.y << "]\n\n";
    }
    for (const NodeSpec& n : s.nodes) {
        os << "[[nodes]]\n"
           << "id = " << n.id << "\n"
           << "position = [" << n.position.x << ", " << n.position.y << "]\n";
        if (!n.waypoints.empty()) {
            os << "waypoints = [";
            for (std::size_t i = 0; i < n.waypoints.size(); ++i) {
                if (i) os << ", ";
                os << "[" << n.waypoints[i].x << ", " << n.waypoints[i].y << "]";
            }
            os << "]\n";
        }
        os << "speed = " << n.speed << "\n";
        if (n.is_reference) os << "reference = true\n";
        if (n.heading) os << "heading = " << *n.heading << "\n";
        os << "\n";
    }
    os << "[radio]\n"
       << "los_max_range = " << s.radio.los_max_range << "\n"
       << "nlos_base_range = " << s.radio.nlos_base_range << "\n"
       << "per_wall_range_penalty = " << s.radio.per_wall_range_penalty << "\n"
       << "los_sigma = " << s.radio.los_sigma << "\n"
       << "los_bias = " << s.radio.los_bias << "\n"
       << "nlos_bias_mean_per_wall = " << s.radio.nlos_bias_mean_per_wall << "\n"
       << "nlos_bias_base = " << s.radio.nlos_bias_base << "\n"
       << "bias_cap = " << s.radio.bias_cap << "\n"
       << "clock_ppm_max = " << s.radio.clock_ppm_max << "\n\n";
    os << "[run]\n"
       << "refresh_rate = " << s.refresh_rate_hz << "\n"
       << "strategy = \"" << to_string(s.strategy) << "\"\n"
       << "seed = " << s.seed << "\n"
       << "epochs = " << s.epochs << "\n"
       << "heading_noise_sigma = " << s.heading_noise_sigma_deg << "\n"
       << "use_link_quality = " << (s.use_link_quality ? "true" : "false") << "\n"
       << "wifi_overhead_ms = " << s.wifi_overhead_ms << "\n"
       << "name = \"" << s.name << "\"\n";
    return os.str();
}

} // namespace dynoloc
