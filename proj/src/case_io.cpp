#include "sgpf/case_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

namespace sgpf {

namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& bundled_case_sources();
}

CaseParseError::CaseParseError(int line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

constexpr std::size_t kBusCols = 13;
constexpr std::size_t kGenCols = 10;
constexpr std::size_t kBranchCols = 11;

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_number(std::string_view tok, double& out) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    const auto* end = tok.data() + tok.size();
    const auto res = std::from_chars(tok.data(), end, out);
    return res.ec == std::errc() && res.ptr == end;
}

struct Line {
    int number;
    std::string_view text;
};

class Parser {
  public:
    explicit Parser(std::string_view text) {
        int n = 1;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            auto nl = text.find('\n', pos);
            if (nl == std::string_view::npos) nl = text.size();
            auto line = text.substr(pos, nl - pos);
            if (const auto pct = line.find('%'); pct != std::string_view::npos) {
                line = line.substr(0, pct);
            }
            lines_.push_back({n, trim(line)});
            ++n;
            pos = nl + 1;
        }
    }

    CaseFile run() {
        CaseFile c;
        std::size_t i = 0;
        skip_blank(i);
        if (i >= lines_.size()) throw CaseParseError(last_line(), "empty case file");
        parse_header(lines_[i], c);
        ++i;
        bool have_base = false;
        bool have_bus = false;
        bool have_branch = false;
        std::set<std::string> seen;
        for (skip_blank(i); i < lines_.size(); skip_blank(i)) {
            const Line& l = lines_[i];
            const auto eq = l.text.find('=');
            if (l.text.rfind("mpc.", 0) != 0 || eq == std::string_view::npos) {
                throw CaseParseError(l.number, "expected 'mpc.<field> = ...'");
            }
            const std::string field(trim(l.text.substr(4, eq - 4)));
            if (field.empty()) throw CaseParseError(l.number, "missing field name");
            if (!seen.insert(field).second) {
                throw CaseParseError(l.number, "field '" + field + "' assigned twice");
            }
            const auto rhs = trim(l.text.substr(eq + 1));
            if (field == "bus" || field == "gen" || field == "branch") {
                auto rows = parse_matrix(i, field, rhs);
                if (field == "bus") {
                    c.bus_rows = std::move(rows);
                    have_bus = true;
                } else if (field == "gen") {
                    c.gen_rows = std::move(rows);
                } else {
                    c.branch_rows = std::move(rows);
                    have_branch = true;
                }
            } else if (field == "baseMVA") {
                double v = 0.0;
                if (!parse_number(strip_semicolon(l, rhs), v)) {
                    throw CaseParseError(l.number, "baseMVA is not a number");
                }
                c.base_mva = v;
                have_base = true;
                ++i;
            } else if (field == "version") {
                auto v = strip_semicolon(l, rhs);
                if (v.size() >= 2 && v.front() == '\'' && v.back() == '\'') v = v.substr(1, v.size() - 2);
                c.version = std::string(v);
                ++i;
            } else {
                c.warnings.push_back({l.number, "skipped unknown field mpc." + field});
                skip_value(i, rhs);
            }
        }
        if (!have_base) throw CaseParseError(last_line(), "missing mpc.baseMVA");
        if (!have_bus) throw CaseParseError(last_line(), "missing mpc.bus");
        if (!have_branch) throw CaseParseError(last_line(), "missing mpc.branch");
        return c;
    }

  private:
    std::vector<Line> lines_;

    int last_line() const { return lines_.empty() ? 1 : lines_.back().number; }

    void skip_blank(std::size_t& i) const {
        while (i < lines_.size() && lines_[i].text.empty()) ++i;
    }

    static std::string_view strip_semicolon(const Line& l, std::string_view rhs) {
        if (rhs.empty() || rhs.back() != ';') throw CaseParseError(l.number, "missing ';'");
        return trim(rhs.substr(0, rhs.size() - 1));
    }

    static void parse_header(const Line& l, CaseFile& c) {
        constexpr std::string_view kw = "function";
        if (l.text.rfind(kw, 0) != 0) {
            throw CaseParseError(l.number, "expected 'function mpc = <name>' header");
        }
        const auto eq = l.text.find('=');
        if (eq == std::string_view::npos || trim(l.text.substr(kw.size(), eq - kw.size())) != "mpc") {
            throw CaseParseError(l.number, "expected 'function mpc = <name>' header");
        }
        const auto name = trim(l.text.substr(eq + 1));
        if (name.empty()) throw CaseParseError(l.number, "missing case name");
        c.name = std::string(name);
    }

    /// Rows separated by ';' or newlines, closed by ']' and an optional ';'.
    std::vector<std::vector<double>> parse_matrix(std::size_t& i, const std::string& field,
                                                  std::string_view rhs) {
        const int open_line = lines_[i].number;
        if (rhs.empty() || rhs.front() != '[') {
            throw CaseParseError(open_line, "mpc." + field + " must be a '[ ... ]' matrix");
        }
        std::vector<std::vector<double>> rows;
        std::vector<int> row_lines;
        std::vector<double> row;
        std::string_view rest = rhs.substr(1);
        for (;;) {
            const int ln = lines_[i].number;
            std::size_t k = 0;
            bool closed = false;
            while (k < rest.size()) {
                const char ch = rest[k];
                if (ch == ' ' || ch == '\t' || ch == ',') {
                    ++k;
                } else if (ch == ';' || ch == ']') {
                    if (!row.empty()) {
                        rows.push_back(std::move(row));
                        row_lines.push_back(ln);
                        row.clear();
                    }
                    ++k;
                    if (ch == ']') {
                        closed = true;
                        break;
                    }
                } else {
                    auto e = rest.find_first_of(" \t,;]", k);
                    if (e == std::string_view::npos) e = rest.size();
                    double v = 0.0;
                    const auto tok = rest.substr(k, e - k);
                    if (!parse_number(tok, v)) {
                        throw CaseParseError(ln, "invalid number '" + std::string(tok) + "' in mpc." + field);
                    }
                    row.push_back(v);
                    k = e;
                }
            }
            if (closed) {
                const auto tail = trim(rest.substr(k));
                if (!tail.empty() && tail != ";") {
                    throw CaseParseError(ln, "unexpected text after ']' in mpc." + field);
                }
                ++i;
                break;
            }
            if (!row.empty()) {
                rows.push_back(std::move(row));
                row_lines.push_back(ln);
                row.clear();
            }
            ++i;
            if (i >= lines_.size()) {
                throw CaseParseError(open_line, "unterminated matrix mpc." + field + " (no closing ']')");
            }
            rest = lines_[i].text;
            if (rest.rfind("mpc.", 0) == 0 || rest.rfind("function", 0) == 0) {
                throw CaseParseError(open_line, "unterminated matrix mpc." + field + " (no closing ']')");
            }
        }
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (rows[r].size() != rows[0].size()) {
                throw CaseParseError(row_lines[r], "ragged row in mpc." + field + ": expected " +
                                                       std::to_string(rows[0].size()) + " columns, got " +
                                                       std::to_string(rows[r].size()));
            }
        }
        const std::size_t need = field == "bus" ? kBusCols : field == "gen" ? kGenCols : kBranchCols;
        if (!rows.empty() && rows[0].size() < need) {
            throw CaseParseError(row_lines[0], "mpc." + field + " needs at least " + std::to_string(need) +
                                                   " columns");
        }
        return rows;
    }

    /// Skips an unknown value: a single line ending in ';', or a bracketed block.
    void skip_value(std::size_t& i, std::string_view rhs) {
        const int open_line = lines_[i].number;
        if (!rhs.empty() && (rhs.front() == '[' || rhs.front() == '{')) {
            const char close = rhs.front() == '[' ? ']' : '}';
            std::string_view rest = rhs;
            for (;;) {
                if (rest.find(close) != std::string_view::npos) {
                    ++i;
                    return;
                }
                ++i;
                if (i >= lines_.size() || lines_[i].text.rfind("mpc.", 0) == 0) {
                    throw CaseParseError(open_line, "unterminated block");
                }
                rest = lines_[i].text;
            }
        }
        ++i;
    }
};

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_table(std::ostringstream& os, const char* name, const char* header,
                 const std::vector<std::vector<double>>& rows) {
    os << "% " << header << '\n' << "mpc." << name << " = [\n";
    for (const auto& r : rows) {
        os << '\t';
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) os << '\t';
            os << format_number(r[j]);
        }
        os << ";\n";
    }
    os << "];\n";
}

int as_id(double v, const char* what) {
    if (v != std::floor(v) || v < 1 || v > 1e9) {
        throw CaseValidationError(std::string(what) + " must be a positive integer");
    }
    return static_cast<int>(v);
}

}  // namespace

CaseFile parse_matpower(std::string_view text) {
    CaseFile c = Parser(text).run();
    validate_case(c);
    return c;
}

void validate_case(const CaseFile& c) {
    if (!(c.base_mva > 0.0)) throw CaseValidationError("baseMVA must be positive");
    std::set<int> ids;
    int slack = 0;
    for (const auto& r : c.bus_rows) {
        const int id = as_id(r[0], "bus id");
        if (!ids.insert(id).second) throw CaseValidationError("duplicate bus id " + std::to_string(id));
        const double type = r[1];
        if (type == 3) ++slack;
        if (type != 1 && type != 2 && type != 3) {
            throw CaseValidationError("bus " + std::to_string(id) + " has unsupported type code");
        }
    }
    if (slack != 1) {
        throw CaseValidationError("expected exactly one slack bus (type 3), found " + std::to_string(slack));
    }
    for (const auto& r : c.gen_rows) {
        const int id = as_id(r[0], "generator bus");
        if (!ids.count(id)) throw CaseValidationError("generator on unknown bus " + std::to_string(id));
    }
    for (const auto& r : c.branch_rows) {
        const int f = as_id(r[0], "branch from-bus");
        const int t = as_id(r[1], "branch to-bus");
        if (!ids.count(f) || !ids.count(t)) {
            throw CaseValidationError("branch " + std::to_string(f) + "-" + std::to_string(t) +
                                      " refers to an unknown bus");
        }
    }
}

std::string serialize(const CaseFile& c) {
    std::ostringstream os;
    os << "function mpc = " << c.name << "\n\n";
    os << "mpc.version = '" << c.version << "';\n";
    os << "mpc.baseMVA = " << format_number(c.base_mva) << ";\n\n";
    write_table(os, "bus", "bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin", c.bus_rows);
    if (!c.gen_rows.empty()) {
        os << '\n';
        write_table(os, "gen", "bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin", c.gen_rows);
    }
    os << '\n';
    write_table(os, "branch", "fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax",
                c.branch_rows);
    return os.str();
}

PowerNetwork to_network(const CaseFile& c) {
    validate_case(c);
    constexpr double deg = std::numbers::pi / 180.0;
    const double base = c.base_mva;
    std::vector<Bus> buses;
    std::map<int, std::size_t> pos;
    for (const auto& r : c.bus_rows) {
        Bus b;
        b.id = static_cast<int>(r[0]);
        b.kind = r[1] == 3 ? BusKind::Slack : r[1] == 2 ? BusKind::PV : BusKind::PQ;
        b.p_load = r[2] / base;
        b.q_load = r[3] / base;
        b.g_shunt = r[4] / base;
        b.b_shunt = r[5] / base;
        b.v_case = r[7];
        b.theta_case = r[8] * deg;
        b.v_setpoint = r[7];
        pos[b.id] = buses.size();
        buses.push_back(b);
    }
    std::set<int> has_setpoint;
    for (const auto& r : c.gen_rows) {
        if (r[7] <= 0) continue;  // out of service
        auto& b = buses[pos.at(static_cast<int>(r[0]))];
        b.p_gen += r[1] / base;
        b.q_gen += r[2] / base;
        if (b.kind != BusKind::PQ && has_setpoint.insert(b.id).second) {
            if (!(r[5] > 0.0)) {
                throw CaseValidationError("nonpositive voltage setpoint at bus " + std::to_string(b.id));
            }
            b.v_setpoint = r[5];
        }
    }
    std::vector<Branch> branches;
    for (const auto& r : c.branch_rows) {
        if (r[10] <= 0) continue;
        Branch br;
        br.from = static_cast<int>(r[0]);
        br.to = static_cast<int>(r[1]);
        br.r = r[2];
        br.x = r[3];
        br.b_charging = r[4];
        br.tap = r[8] == 0.0 ? 1.0 : r[8];
        br.phase_shift = r[9] * deg;
        branches.push_back(br);
    }
    try {
        return PowerNetwork(c.name, base, std::move(buses), std::move(branches));
    } catch (const ContractViolation& e) {
        throw CaseValidationError(e.what());
    }
}

CaseFile bundled_case(BundledCase which) {
    const std::string_view key = which == BundledCase::NewEngland39 ? "case39" : "demo3";
    for (const auto& [name, text] : detail::bundled_case_sources()) {
        if (name == key) return parse_matpower(text);
    }
    throw std::logic_error("bundled case missing from build");
}

CaseFile load_case(const std::string& spec) {
    if (spec == "bundled:case39") return bundled_case(BundledCase::NewEngland39);
    if (spec == "bundled:demo3") return bundled_case(BundledCase::Demo3Bus);
    if (spec.rfind("bundled:", 0) == 0) throw CaseIoError("unknown bundled case '" + spec + "'");
    std::ifstream in(spec, std::ios::binary);
    if (!in) throw CaseIoError("cannot open case file '" + spec + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_matpower(ss.str());
}

}  // namespace sgpf
