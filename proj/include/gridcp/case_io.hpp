#pragma once

#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gridcp/grid_model.hpp"

namespace gridcp {

enum class CaseFormat { NativeJson, MatpowerSubset };

struct ParseResult {
    GridCase grid;
    std::vector<std::string> warnings;
};

namespace detail {

inline BusKind bus_kind_from_string(const std::string& s) {
    if (s == "Slack") return BusKind::Slack;
    if (s == "PV") return BusKind::PV;
    if (s == "PQ") return BusKind::PQ;
    throw ValidationError("unknown bus kind \"" + s + "\"");
}

inline ParseResult parse_native_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // nlohmann reports a byte offset; recover line/column for the message
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') { ++line; col = 1; } else ++col;
        }
        throw SyntaxError(e.what(), line, col);
    }

    ParseResult out;
    if (!doc.contains("schema_version"))
        throw ValidationError("missing required key schema_version");
    if (doc["schema_version"].get<int>() != 1)
        throw ValidationError("unsupported schema_version " +
                              doc["schema_version"].dump() + ", expected 1");
    for (const char* key : {"base_mva", "buses", "branches", "generators"})
        if (!doc.contains(key))
            throw ValidationError(std::string("missing required key ") + key);

    out.grid.base_mva = doc["base_mva"].get<double>();
    for (const auto& jb : doc["buses"]) {
        Bus b;
        b.id = jb.at("id").get<int>();
        b.kind = bus_kind_from_string(jb.at("kind").get<std::string>());
        b.base_kv = jb.at("base_kv").get<double>();
        b.p_load = jb.value("p_load", 0.0);
        b.q_load = jb.value("q_load", 0.0);
        if (b.kind != BusKind::PQ) {
            if (!jb.contains("voltage_setpoint") || jb["voltage_setpoint"].is_null())
                throw ValidationError("bus " + std::to_string(b.id) +
                                      " is " + to_string(b.kind) +
                                      " but has no voltage_setpoint");
            b.voltage_setpoint = jb["voltage_setpoint"].get<double>();
        } else if (jb.contains("voltage_setpoint") && !jb["voltage_setpoint"].is_null()) {
            b.voltage_setpoint = jb["voltage_setpoint"].get<double>();
        }
        out.grid.buses.push_back(b);
    }
    for (const auto& jb : doc["branches"]) {
        Branch br;
        br.id = jb.at("id").get<int>();
        br.from_bus = jb.at("from_bus").get<int>();
        br.to_bus = jb.at("to_bus").get<int>();
        br.r = jb.at("r").get<double>();
        br.x = jb.at("x").get<double>();
        br.b_charging = jb.value("b_charging", 0.0);
        br.tap_ratio = jb.value("tap_ratio", 1.0);
        br.rating = jb.at("rating").get<double>();
        br.outage_eligible = jb.value("outage_eligible", true);
        out.grid.branches.push_back(br);
    }
    for (const auto& jg : doc["generators"]) {
        Generator g;
        g.bus = jg.at("bus").get<int>();
        g.p_set = jg.at("p_set").get<double>();
        g.q_min = jg.at("q_min").get<double>();
        g.q_max = jg.at("q_max").get<double>();
        out.grid.generators.push_back(g);
    }
    validate_case(out.grid);
    return out;
}

// --- MATPOWER subset -------------------------------------------------------
// Covers mpc.baseMVA and the mpc.bus / mpc.branch / mpc.gen matrices with the
// column ordering of the public MATPOWER manual. Any other mpc.* assignment
// is skipped and reported in the warning list.

struct MpMatrix {
    std::string name;
    std::vector<std::vector<double>> rows;
    std::size_t line = 0;
};

inline std::string strip_matpower_comment(const std::string& line) {
    auto p = line.find('%');
    return p == std::string::npos ? line : line.substr(0, p);
}

inline ParseResult parse_matpower(std::string_view text) {
    ParseResult out;
    std::optional<double> base_mva;
    std::vector<MpMatrix> matrices;

    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t lineno = 0;
    std::optional<MpMatrix> current;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = strip_matpower_comment(raw);
        // trim
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        if (line.empty()) continue;

        if (!current) {
            if (line.rfind("mpc.", 0) != 0) continue; // function header etc.
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw SyntaxError("expected '=' in mpc assignment", lineno, 1);
            std::string name = line.substr(4, eq - 4);
            name.erase(name.find_last_not_of(" \t") + 1);
            std::string rhs = line.substr(eq + 1);
            auto rhs_first = rhs.find_first_not_of(" \t");
            rhs = rhs_first == std::string::npos ? "" : rhs.substr(rhs_first);

            if (name == "baseMVA") {
                double v = 0;
                auto [p, ec] = std::from_chars(rhs.data(), rhs.data() + rhs.size(), v);
                if (ec != std::errc())
                    throw SyntaxError("cannot parse baseMVA value", lineno,
                                      static_cast<std::size_t>(eq + 2));
                (void)p;
                base_mva = v;
                continue;
            }
            if (rhs.empty() || rhs[0] != '[') {
                out.warnings.push_back("skipped field mpc." + name);
                continue;
            }
            current = MpMatrix{name, {}, lineno};
            rhs = rhs.substr(1); // past '['
            line = rhs;
            // fall through to row parsing with the remainder
            if (line.find_first_not_of(" \t;") == std::string::npos) continue;
        }

        bool closing = false;
        auto bracket = line.find(']');
        if (bracket != std::string::npos) {
            closing = true;
            line = line.substr(0, bracket);
        }
        // rows are ';'-terminated; several may share a physical line
        std::size_t start = 0;
        while (start < line.size()) {
            auto semi = line.find(';', start);
            std::string row_text =
                line.substr(start, semi == std::string::npos ? std::string::npos
                                                             : semi - start);
            start = semi == std::string::npos ? line.size() : semi + 1;
            std::vector<double> row;
            const char* p = row_text.data();
            const char* end = p + row_text.size();
            while (p < end) {
                while (p < end && (*p == ' ' || *p == '\t' || *p == ',')) ++p;
                if (p >= end) break;
                double v = 0;
                auto [next, ec] = std::from_chars(p, end, v);
                if (ec != std::errc())
                    throw SyntaxError("cannot parse number in mpc." +
                                          (current ? current->name : std::string()),
                                      lineno,
                                      static_cast<std::size_t>(p - row_text.data()) + 1);
                row.push_back(v);
                p = next;
            }
            if (!row.empty()) current->rows.push_back(std::move(row));
        }
        if (closing) {
            const bool known = current->name == "bus" || current->name == "branch" ||
                               current->name == "gen";
            if (known)
                matrices.push_back(std::move(*current));
            else
                out.warnings.push_back("skipped field mpc." + current->name);
            current.reset();
        }
    }
    if (current)
        throw SyntaxError("unterminated matrix mpc." + current->name,
                          current->line, 1);
    if (!base_mva) throw ValidationError("missing mpc.baseMVA");
    out.grid.base_mva = *base_mva;
    const double s = *base_mva;

    const MpMatrix* bus_m = nullptr;
    const MpMatrix* branch_m = nullptr;
    const MpMatrix* gen_m = nullptr;
    for (const auto& m : matrices) {
        if (m.name == "bus") bus_m = &m;
        if (m.name == "branch") branch_m = &m;
        if (m.name == "gen") gen_m = &m;
    }
    if (!bus_m) throw ValidationError("missing mpc.bus");
    if (!branch_m) throw ValidationError("missing mpc.branch");
    if (!gen_m) throw ValidationError("missing mpc.gen");

    for (const auto& row : bus_m->rows) {
        if (row.size() < 13)
            throw ValidationError("mpc.bus row has " + std::to_string(row.size()) +
                                  " columns, expected >= 13");
        Bus b;
        b.id = static_cast<int>(row[0]);
        const int type = static_cast<int>(row[1]);
        switch (type) {
            case 1: b.kind = BusKind::PQ; break;
            case 2: b.kind = BusKind::PV; break;
            case 3: b.kind = BusKind::Slack; break;
            default:
                throw ValidationError("bus " + std::to_string(b.id) +
                                      " has unsupported type " + std::to_string(type));
        }
        b.p_load = row[2] / s;
        b.q_load = row[3] / s;
        if (row[4] != 0.0 || row[5] != 0.0)
            out.warnings.push_back("bus " + std::to_string(b.id) +
                                   ": fixed shunt (Gs/Bs) not supported, skipped");
        b.voltage_setpoint = row[7] > 0 ? row[7] : 1.0; // VM; gen VG overrides below
        b.base_kv = row[9];
        out.grid.buses.push_back(b);
    }

    int next_branch_id = 1;
    for (const auto& row : branch_m->rows) {
        if (row.size() < 11)
            throw ValidationError("mpc.branch row has " + std::to_string(row.size()) +
                                  " columns, expected >= 11");
        Branch br;
        br.id = next_branch_id++;
        br.from_bus = static_cast<int>(row[0]);
        br.to_bus = static_cast<int>(row[1]);
        br.r = row[2];
        br.x = row[3];
        br.b_charging = row[4];
        br.rating = row[5] / s;
        br.tap_ratio = row[8] == 0.0 ? 1.0 : row[8];
        if (row[9] != 0.0)
            out.warnings.push_back("branch " + std::to_string(br.id) +
                                   ": phase shift not supported, skipped");
        if (row[10] == 0.0) {
            out.warnings.push_back("branch " + std::to_string(br.id) +
                                   ": out of service, dropped");
            --next_branch_id;
            continue;
        }
        out.grid.branches.push_back(br);
    }

    for (const auto& row : gen_m->rows) {
        if (row.size() < 10)
            throw ValidationError("mpc.gen row has " + std::to_string(row.size()) +
                                  " columns, expected >= 10");
        Generator g;
        g.bus = static_cast<int>(row[0]);
        if (row[7] <= 0) {
            out.warnings.push_back("generator at bus " + std::to_string(g.bus) +
                                   ": out of service, dropped");
            continue;
        }
        g.p_set = row[1] / s;
        g.q_max = row[3] / s;
        g.q_min = row[4] / s;
        const double vg = row[5];
        for (auto& b : out.grid.buses) {
            if (b.id != g.bus || b.kind == BusKind::PQ) continue;
            if (vg > 0) b.voltage_setpoint = vg;
        }
        out.grid.generators.push_back(g);
    }

    validate_case(out.grid);
    return out;
}

} // namespace detail

inline ParseResult parse_case(std::string_view text, CaseFormat format) {
    switch (format) {
        case CaseFormat::NativeJson: return detail::parse_native_json(text);
        case CaseFormat::MatpowerSubset: return detail::parse_matpower(text);
    }
    throw ValidationError("unknown case format");
}

// Canonical content hash of the parsed case; identical for the same physical
// case regardless of the source format.
inline std::uint64_t case_fingerprint(const GridCase& grid) {
    std::string s;
    s.reserve(4096);
    auto put = [&s](const std::string& v) {
        s += v;
        s += '|';
    };
    put(format_double(grid.base_mva));
    for (const auto& b : grid.buses) {
        put(std::to_string(b.id));
        put(to_string(b.kind));
        put(format_double(b.kind == BusKind::PQ ? 0.0 : b.voltage_setpoint));
        put(format_double(b.base_kv));
        put(format_double(b.p_load));
        put(format_double(b.q_load));
    }
    for (const auto& br : grid.branches) {
        put(std::to_string(br.id));
        put(std::to_string(br.from_bus));
        put(std::to_string(br.to_bus));
        put(format_double(br.r));
        put(format_double(br.x));
        put(format_double(br.b_charging));
        put(format_double(br.tap_ratio));
        put(format_double(br.rating));
        put(br.outage_eligible ? "1" : "0");
    }
    for (const auto& g : grid.generators) {
        put(std::to_string(g.bus));
        put(format_double(g.p_set));
        put(format_double(g.q_min));
        put(format_double(g.q_max));
    }
    return fnv1a64(s);
}

} // namespace gridcp
