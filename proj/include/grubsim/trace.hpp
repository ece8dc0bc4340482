#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <string_view>

#include "grubsim/model.hpp"

namespace grubsim {

/// Newline-delimited JSON event log. Every record starts with "t" and "ev";
/// the remaining fields appear in emission order. Rationals are written as
/// strings ("41/2"), integers as JSON numbers. Event counts are kept even
/// when no output stream is attached.
class TraceSink {
public:
    class Record {
    public:
        Record(TraceSink* sink, std::string_view ev, const Instant& t) : sink_(sink)
        {
            if (!sink_)
                return;
            line_ = "{\"t\":\"" + t.to_string() + "\",\"ev\":\"";
            line_ += ev;
            line_ += '"';
        }
        Record(const Record&) = delete;
        Record& operator=(const Record&) = delete;
        ~Record()
        {
            if (sink_) {
                line_ += "}\n";
                *sink_->out_ << line_;
            }
        }

        Record& field(std::string_view name, std::int64_t v)
        {
            if (sink_)
                append_key(name) += std::to_string(v);
            return *this;
        }
        Record& field(std::string_view name, std::uint32_t v) { return field(name, static_cast<std::int64_t>(v)); }
        Record& field(std::string_view name, std::uint64_t v) { return field(name, static_cast<std::int64_t>(v)); }
        Record& field(std::string_view name, bool v)
        {
            if (sink_)
                append_key(name) += v ? "true" : "false";
            return *this;
        }
        Record& field(std::string_view name, const Rational& v)
        {
            if (sink_)
                append_key(name) += '"' + v.to_string() + '"';
            return *this;
        }
        Record& field(std::string_view name, const Bandwidth& v) { return field(name, v.value()); }
        Record& field(std::string_view name, std::string_view v)
        {
            if (sink_) {
                append_key(name) += '"';
                line_ += v;
                line_ += '"';
            }
            return *this;
        }
        Record& field(std::string_view name, const char* v) { return field(name, std::string_view(v)); }

    private:
        std::string& append_key(std::string_view name)
        {
            line_ += ",\"";
            line_ += name;
            line_ += "\":";
            return line_;
        }

        TraceSink* sink_;
        std::string line_;
    };

    explicit TraceSink(std::ostream* out = nullptr) : out_(out) {}

    Record emit(std::string_view ev, const Instant& t)
    {
        ++counts_[std::string(ev)];
        return Record(out_ ? this : nullptr, ev, t);
    }

    std::uint64_t count(std::string_view ev) const
    {
        auto it = counts_.find(std::string(ev));
        return it == counts_.end() ? 0 : it->second;
    }

    bool enabled() const { return out_ != nullptr; }

private:
    std::ostream* out_;
    std::map<std::string, std::uint64_t> counts_;
};

} // namespace grubsim
