#pragma once

// Symbol sequence -> timed motor drive schedule.

#include "skinsense/errors.hpp"
#include "skinsense/framing.hpp"

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace skinsense {

struct DriveCommand {
    int pwm = 0;
    std::int64_t start_ms = 0;
    int duration_ms = 0;

    std::int64_t end_ms() const { return start_ms + duration_ms; }

    friend bool operator==(const DriveCommand&, const DriveCommand&) = default;
};

struct DriveSchedule {
    std::vector<DriveCommand> commands;
    std::int64_t total_ms = 0; // includes the final OFF gap

    friend bool operator==(const DriveSchedule&, const DriveSchedule&) = default;
};

inline DriveSchedule schedule(std::span<const Symbol> symbols) {
    DriveSchedule out;
    out.commands.reserve(symbols.size());
    std::int64_t t = 0;
    for (const auto& s : symbols) {
        out.commands.push_back(DriveCommand{s.pwm, t, s.on_ms});
        t += s.on_ms + s.off_ms;
    }
    out.total_ms = t;
    return out;
}

inline std::int64_t duration_ms(const DriveSchedule& sched) { return sched.total_ms; }

// Removes command `index` and leaves its slot silent; timing of the other
// commands is unchanged. Used for fault injection.
inline DriveSchedule without_command(DriveSchedule sched, std::size_t index) {
    if (index < sched.commands.size())
        sched.commands.erase(sched.commands.begin() + static_cast<std::ptrdiff_t>(index));
    return sched;
}

// Shifts every command by `lead_ms` and extends the total by both margins,
// modelling a receiver that starts recording before the transmission and
// stops after it.
inline DriveSchedule with_margins(DriveSchedule sched, std::int64_t lead_ms, std::int64_t tail_ms) {
    for (auto& c : sched.commands) c.start_ms += lead_ms;
    sched.total_ms += lead_ms + tail_ms;
    return sched;
}

// CSV: header `start_ms,duration_ms,pwm`, one row per command.
inline void write_schedule_csv(std::ostream& os, const DriveSchedule& sched) {
    os << "start_ms,duration_ms,pwm\n";
    for (const auto& c : sched.commands) os << c.start_ms << ',' << c.duration_ms << ',' << c.pwm << '\n';
}

// The CSV does not carry the final OFF gap; `trailing_off_ms` restores it.
inline DriveSchedule read_schedule_csv(std::istream& is, int trailing_off_ms = 150) {
    DriveSchedule out;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "start_ms,duration_ms,pwm")
                throw ParseError("line " + std::to_string(line_no) + ": expected header start_ms,duration_ms,pwm");
            header = true;
            continue;
        }
        std::istringstream row(line);
        DriveCommand c;
        char comma1 = 0, comma2 = 0;
        if (!(row >> c.start_ms >> comma1 >> c.duration_ms >> comma2 >> c.pwm) || comma1 != ',' || comma2 != ',' ||
            c.duration_ms <= 0 || c.start_ms < 0)
            throw ParseError("line " + std::to_string(line_no) + ": malformed schedule row");
        if (!out.commands.empty() && c.start_ms < out.commands.back().end_ms())
            throw ParseError("line " + std::to_string(line_no) + ": overlapping command");
        out.commands.push_back(c);
    }
    if (!header) throw ParseError("line 1: missing header");
    out.total_ms = out.commands.empty() ? 0 : out.commands.back().end_ms() + trailing_off_ms;
    return out;
}

} // namespace skinsense
