#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "grubsim/scenario.hpp"

namespace grubsim {

using Json = nlohmann::ordered_json;

/// Typed, path-aware access to a JSON object. Every error names the field
/// path, e.g. `tasks[3].period`.
class JsonReader {
public:
    JsonReader(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            error("", "expected an object");
    }

    bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    const Json& raw(const char* key) const
    {
        seen_.insert(key);
        if (!j_.contains(key))
            error(key, "missing required field");
        return j_.at(key);
    }

    std::int64_t integer(const char* key) const
    {
        const Json& v = raw(key);
        if (!v.is_number_integer())
            error(key, "expected an integer");
        return v.get<std::int64_t>();
    }

    std::int64_t integer(const char* key, std::int64_t dflt) const { return has(key) ? integer(key) : mark(key, dflt); }

    std::uint64_t unsigned_integer(const char* key) const
    {
        const Json& v = raw(key);
        if (v.is_number_unsigned())
            return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        if (v.is_string()) {
            // 64-bit seeds may be written as strings to survive JSON tooling
            try {
                std::size_t pos = 0;
                auto s = v.get<std::string>();
                auto x = std::stoull(s, &pos, 0);
                if (pos == s.size())
                    return x;
            } catch (const std::exception&) {
            }
        }
        error(key, "expected a non-negative integer");
    }

    std::uint64_t unsigned_integer(const char* key, std::uint64_t dflt) const
    {
        return has(key) ? unsigned_integer(key) : mark(key, dflt);
    }

    double number(const char* key) const
    {
        const Json& v = raw(key);
        if (!v.is_number())
            error(key, "expected a number");
        return v.get<double>();
    }

    double number(const char* key, double dflt) const { return has(key) ? number(key) : mark(key, dflt); }

    bool boolean(const char* key, bool dflt) const
    {
        if (!has(key))
            return mark(key, dflt);
        const Json& v = raw(key);
        if (!v.is_boolean())
            error(key, "expected true or false");
        return v.get<bool>();
    }

    std::string string(const char* key) const
    {
        const Json& v = raw(key);
        if (!v.is_string())
            error(key, "expected a string");
        return v.get<std::string>();
    }

    std::string string(const char* key, std::string dflt) const { return has(key) ? string(key) : mark(key, dflt); }

    /// Exact rational: "a/b", "0.25", or a JSON number (read through its
    /// decimal text, so 0.1 means 1/10).
    Rational rational(const char* key) const
    {
        const Json& v = raw(key);
        try {
            if (v.is_string())
                return Rational::parse(v.get<std::string>());
            if (v.is_number_integer())
                return Rational(v.get<std::int64_t>());
            if (v.is_number())
                return Rational::parse(v.dump());
        } catch (const SimError& e) {
            error(key, e.what());
        }
        error(key, "expected a rational (\"a/b\", decimal string, or number)");
    }

    Bandwidth bandwidth(const char* key) const
    {
        Rational r = rational(key);
        if (r.sign() < 0)
            error(key, "must be non-negative");
        return Bandwidth(r);
    }

    Bandwidth bandwidth(const char* key, const Bandwidth& dflt) const { return has(key) ? bandwidth(key) : mark(key, dflt); }

    const Json& array(const char* key) const
    {
        const Json& v = raw(key);
        if (!v.is_array())
            error(key, "expected an array");
        return v;
    }

    JsonReader object(const char* key) const
    {
        raw(key);
        return JsonReader(j_.at(key), child(key));
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string element(const char* key, std::size_t i) const { return child(key) + "[" + std::to_string(i) + "]"; }

    /// Rejects fields that were never read: typos must not pass silently.
    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                error(it.key(), "unknown field");
    }

    [[noreturn]] void error(const std::string& key, const std::string& what) const
    {
        std::string p = key.empty() ? path_ : child(key);
        fail(ErrorKind::Config, "field '" + (p.empty() ? std::string("<root>") : p) + "': " + what);
    }

private:
    template <typename T>
    T mark(const char* key, T v) const
    {
        seen_.insert(key);
        return v;
    }

    const Json& j_;
    std::string path_;
    mutable std::set<std::string> seen_;
};

inline void check_schema_version(const JsonReader& r)
{
    auto v = r.integer("schema_version");
    if (v != kScenarioSchemaVersion)
        r.error("schema_version", "unsupported version " + std::to_string(v) + " (expected " +
                                      std::to_string(kScenarioSchemaVersion) + ")");
}

inline Json load_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::Io, "cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Config, path + ": malformed JSON: " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorKind::Io, "cannot write " + path);
    out << text;
    if (!out)
        fail(ErrorKind::Io, "write failed: " + path);
}

inline const char* exec_kind_name(ExecKind k)
{
    switch (k) {
    case ExecKind::TwoLevelUniform: return "two_level";
    case ExecKind::Weibull: return "weibull";
    case ExecKind::Fixed: return "fixed";
    }
    return "?";
}

inline ExecKind parse_exec_kind(const JsonReader& r, const char* key, const std::string& s)
{
    if (s == "two_level")
        return ExecKind::TwoLevelUniform;
    if (s == "weibull")
        return ExecKind::Weibull;
    if (s == "fixed")
        return ExecKind::Fixed;
    r.error(key, "expected two_level, weibull or fixed");
}

inline TaskKind parse_task_kind(const JsonReader& r, const char* key, const std::string& s)
{
    if (s == "periodic")
        return TaskKind::Periodic;
    if (s == "sporadic")
        return TaskKind::Sporadic;
    r.error(key, "expected periodic or sporadic");
}

inline const char* task_kind_name(TaskKind k) { return k == TaskKind::Periodic ? "periodic" : "sporadic"; }

// ---- ScenarioConfig ----------------------------------------------------

inline Json to_json(const ScenarioConfig& c)
{
    Json j;
    j["schema_version"] = kScenarioSchemaVersion;
    j["n"] = c.n;
    j["m"] = c.m;
    j["target_util"] = c.target_util.to_string();
    j["exec"] = exec_kind_name(c.exec_kind);
    j["pm"] = c.pm;
    j["migrating_util"] = c.migrating_util.to_string();
    j["seed"] = c.seed;
    j["horizon"] = c.horizon;
    j["arrival"] = task_kind_name(c.arrival);
    j["sporadic_jitter"] = c.sporadic_jitter;
    j["weibull_shape"] = c.weibull_shape;
    j["exec_min"] = c.exec_min;
    j["exec_max"] = c.exec_max;
    j["max_discards"] = c.max_discards;
    j["global_admission_filter"] = c.global_admission_filter;
    Json dyn = Json::array();
    for (const auto& d : c.dynamic_tasks) {
        Json e;
        e["util"] = d.util.to_string();
        e["insert_at"] = d.insert_at;
        if (d.remove_at)
            e["remove_at"] = *d.remove_at;
        e["overrun"] = d.overrun;
        dyn.push_back(e);
    }
    j["dynamic_tasks"] = dyn;
    return j;
}

/// Reads the generator fields of `r` into `c`; fields absent keep their
/// current value.
inline void read_scenario_config_fields(const JsonReader& r, ScenarioConfig& c)
{
    c.n = static_cast<std::uint32_t>(r.integer("n", c.n));
    c.m = static_cast<std::uint32_t>(r.integer("m", c.m));
    if (r.has("target_util"))
        c.target_util = r.bandwidth("target_util");
    if (r.has("exec"))
        c.exec_kind = parse_exec_kind(r, "exec", r.string("exec"));
    c.pm = r.number("pm", c.pm);
    c.migrating_util = r.bandwidth("migrating_util", c.migrating_util);
    c.seed = r.unsigned_integer("seed", c.seed);
    c.horizon = r.integer("horizon", c.horizon);
    if (r.has("arrival"))
        c.arrival = parse_task_kind(r, "arrival", r.string("arrival"));
    c.sporadic_jitter = r.number("sporadic_jitter", c.sporadic_jitter);
    c.weibull_shape = r.number("weibull_shape", c.weibull_shape);
    c.exec_min = r.integer("exec_min", c.exec_min);
    c.exec_max = r.integer("exec_max", c.exec_max);
    c.max_discards = r.unsigned_integer("max_discards", c.max_discards);
    c.global_admission_filter = r.boolean("global_admission_filter", c.global_admission_filter);
    if (r.has("dynamic_tasks")) {
        const Json& arr = r.array("dynamic_tasks");
        c.dynamic_tasks.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            JsonReader e(arr[i], r.element("dynamic_tasks", i));
            DynamicTaskSpec d;
            d.util = e.bandwidth("util");
            d.insert_at = e.integer("insert_at");
            if (e.has("remove_at"))
                d.remove_at = e.integer("remove_at");
            d.overrun = e.number("overrun", 0.0);
            e.finish();
            c.dynamic_tasks.push_back(d);
        }
    }
    if (c.n == 0)
        r.error("n", "must be >= 1");
    if (c.m == 0)
        r.error("m", "must be >= 1");
    if (c.horizon <= 0)
        r.error("horizon", "must be positive");
    if (!(c.pm >= 0.0 && c.pm <= 1.0))
        r.error("pm", "must be in [0, 1]");
    if (c.exec_min < 1 || c.exec_max <= c.exec_min)
        r.error("exec_max", "need 1 <= exec_min < exec_max");
    if (c.sporadic_jitter < 0.0)
        r.error("sporadic_jitter", "must be >= 0");
}

inline ScenarioConfig scenario_config_from_json(const Json& j, const std::string& path = "")
{
    JsonReader r(j, path);
    check_schema_version(r);
    ScenarioConfig c;
    read_scenario_config_fields(r, c);
    r.finish();
    return c;
}

// ---- Scenario ------------------------------------------------------------

inline Json to_json(const ExecModel& m)
{
    Json j;
    j["kind"] = exec_kind_name(m.kind);
    j["minexec"] = m.minexec;
    j["maxexec"] = m.maxexec;
    j["budget"] = m.budget;
    j["pm"] = m.pm;
    if (m.kind == ExecKind::Weibull) {
        j["weibull_shape"] = m.weibull_shape;
        j["weibull_scale"] = m.weibull_scale;
        j["weibull_location"] = m.weibull_location;
    }
    if (m.kind == ExecKind::Fixed)
        j["fixed"] = m.fixed;
    return j;
}

inline Json to_json(const TaskSpec& t)
{
    Json j;
    j["id"] = t.id;
    j["period"] = t.period;
    j["budget"] = t.budget;
    j["util"] = t.utilization().to_string();
    j["kind"] = task_kind_name(t.kind);
    j["arrival_time"] = t.arrival_time;
    if (t.departure_time)
        j["departure_time"] = *t.departure_time;
    j["migrating_util"] = t.migrating_util.to_string();
    j["sporadic_jitter"] = t.sporadic_jitter;
    j["dynamic"] = t.dynamic;
    j["exec"] = to_json(t.exec);
    return j;
}

inline Json to_json(const Scenario& s)
{
    Json j;
    j["schema_version"] = kScenarioSchemaVersion;
    j["seed"] = s.seed;
    j["attempt"] = s.attempt;
    j["config"] = to_json(s.config);
    Json tasks = Json::array();
    for (const auto& t : s.tasks)
        tasks.push_back(to_json(t));
    j["tasks"] = tasks;
    return j;
}

inline ExecModel exec_model_from_json(const JsonReader& r)
{
    ExecModel m;
    m.kind = parse_exec_kind(r, "kind", r.string("kind"));
    m.minexec = r.integer("minexec");
    m.maxexec = r.integer("maxexec");
    m.budget = r.integer("budget");
    m.pm = r.number("pm", m.pm);
    m.weibull_shape = r.number("weibull_shape", m.weibull_shape);
    m.weibull_scale = r.number("weibull_scale", m.weibull_scale);
    m.weibull_location = r.number("weibull_location", m.weibull_location);
    if (r.has("fixed")) {
        const Json& arr = r.array("fixed");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_number_integer() || arr[i].get<std::int64_t>() <= 0)
                r.error("fixed[" + std::to_string(i) + "]", "expected a positive integer");
            m.fixed.push_back(arr[i].get<std::int64_t>());
        }
    }
    if (m.minexec < 1 || m.maxexec < m.minexec)
        r.error("maxexec", "need 1 <= minexec <= maxexec");
    if (m.kind == ExecKind::TwoLevelUniform && (m.budget < m.minexec || m.budget >= m.maxexec))
        r.error("budget", "two-level model needs minexec <= budget < maxexec");
    if (m.kind == ExecKind::Fixed && m.fixed.empty())
        r.error("fixed", "fixed model needs at least one demand");
    r.finish();
    return m;
}

inline TaskSpec task_from_json(const JsonReader& r)
{
    TaskSpec t;
    t.id = static_cast<TaskId>(r.integer("id"));
    t.period = r.integer("period");
    t.budget = r.integer("budget");
    if (t.period <= 0)
        r.error("period", "must be positive");
    if (t.budget <= 0 || t.budget > t.period)
        r.error("budget", "need 0 < budget <= period");
    if (r.has("util") && r.bandwidth("util") != t.utilization())
        r.error("util", "does not equal budget/period");
    if (r.has("kind"))
        t.kind = parse_task_kind(r, "kind", r.string("kind"));
    t.arrival_time = r.integer("arrival_time", 0);
    if (r.has("departure_time"))
        t.departure_time = r.integer("departure_time");
    t.migrating_util = r.bandwidth("migrating_util", t.migrating_util);
    t.sporadic_jitter = r.number("sporadic_jitter", t.sporadic_jitter);
    t.dynamic = r.boolean("dynamic", false);
    t.exec = exec_model_from_json(r.object("exec"));
    r.finish();
    return t;
}

inline Scenario scenario_from_json(const Json& j, const std::string& path = "")
{
    JsonReader r(j, path);
    check_schema_version(r);
    Scenario s;
    s.seed = r.unsigned_integer("seed");
    s.attempt = r.unsigned_integer("attempt", 0);
    if (r.has("config")) {
        JsonReader c = r.object("config");
        check_schema_version(c);
        read_scenario_config_fields(c, s.config);
        c.finish();
    }
    const Json& arr = r.array("tasks");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        JsonReader tr(arr[i], r.element("tasks", i));
        s.tasks.push_back(task_from_json(tr));
        if (s.tasks.back().id != i)
            tr.error("id", "task ids must be 0..n-1 in order");
    }
    r.finish();
    return s;
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

} // namespace grubsim
