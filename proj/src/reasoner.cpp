#include "chatabl/reasoner.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "chatabl/equation.hpp"

namespace chatabl {

const char* const kCdpQuery =
    "Please determine whether the given expression is consistent with the rules base and the "
    "exemplar prompts ?";
const char* const kRdpQuery =
    "Could you please correct the given expression and provide reasoning for your solution ? And "
    "what type of addition operation is likely being performed in this expression?";
const char* const kDefaultPenalty = "No, please continue reasoning";

namespace {

const char* role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

std::string exemplar_block(const KnowledgeBase& kb, const std::string& expression, std::size_t k) {
    std::ostringstream out;
    auto query = symbols_from_string(expression);
    SymbolSeq query_seq = query ? *query : SymbolSeq{};
    std::size_t usable = std::min(k, kb.exemplars.size());
    if (usable == 0) return "Exemplars: none provided.\n";
    out << "Exemplars:\n";
    for (const Exemplar& e : select_exemplars(kb, query_seq, usable)) {
        out << "- " << e.expr << " -> " << (e.veracity ? "correct" : "incorrect");
        if (e.explanation) out << " (" << *e.explanation << ")";
        out << "\n";
    }
    return out.str();
}

std::string cdp_system(const KnowledgeBase& kb, const std::string& expression, std::size_t k) {
    std::ostringstream out;
    out << "You are a reasoning expert for symbolic equations.\n\n"
        << "Rules:\n"
        << render_rules_text(kb) << "\n"
        << exemplar_block(kb, expression, k) << "\n"
        << "Output format: reply with a first line 'VERDICT: CONSISTENT' or "
           "'VERDICT: INCONSISTENT', optionally followed by an explanation.\n";
    return out.str();
}

std::string rdp_system(const KnowledgeBase& kb, const std::string& expression, std::size_t k) {
    std::ostringstream out;
    out << "You are a reasoning expert for symbolic equations.\n\n"
        << "Rules:\n"
        << render_rules_text(kb) << "\n"
        << exemplar_block(kb, expression, k) << "\n"
        << "Output format: reply with a first line 'VERDICT: CONSISTENT' or "
           "'VERDICT: INCONSISTENT', then a line 'CORRECTED: <expression>' with your corrected "
           "expression, a line 'OPERATION: <free text>' naming the operation you believe is being "
           "performed, and your reasoning process.\n";
    return out.str();
}

} // namespace

Prompt build_cdp(const KnowledgeBase& kb, const std::string& expression, std::size_t k) {
    Prompt p;
    p.kind = PromptKind::CDP;
    p.expression = expression;
    p.messages.push_back(ChatMessage{Role::System, cdp_system(kb, expression, k)});
    p.messages.push_back(ChatMessage{Role::User, std::string(kCdpQuery) + "\n" + expression});
    return p;
}

Prompt build_rdp(const KnowledgeBase& kb, const std::string& expression, const std::string& penalty,
                 std::size_t k) {
    if (penalty.empty()) throw std::invalid_argument("build_rdp: penalty must be nonempty");
    Prompt p;
    p.kind = PromptKind::RDP;
    p.expression = expression;
    p.penalty = penalty;
    p.messages.push_back(ChatMessage{Role::System, rdp_system(kb, expression, k)});
    p.messages.push_back(
        ChatMessage{Role::User, penalty + "\n" + std::string(kRdpQuery) + "\n" + expression});
    return p;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

std::optional<Verdict> parse_reply(const std::string& text, PromptKind kind) {
    (void)kind;
    Verdict v;
    bool have_verdict = false;
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> rest;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (!have_verdict && t.rfind("VERDICT:", 0) == 0) {
            std::string value = trim(t.substr(8));
            if (value == "CONSISTENT") {
                v.consistent = true;
            } else if (value == "INCONSISTENT") {
                v.consistent = false;
            } else {
                return std::nullopt;
            }
            have_verdict = true;
        } else if (t.rfind("CORRECTED:", 0) == 0) {
            std::string value = trim(t.substr(10));
            if (!symbols_from_string(value)) return std::nullopt;
            v.corrected_expression = value;
        } else if (t.rfind("OPERATION:", 0) == 0) {
            v.operation_guess = trim(t.substr(10));
        } else if (!t.empty()) {
            rest.push_back(t);
        }
    }
    if (!have_verdict) return std::nullopt;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        if (i) v.reason += "\n";
        v.reason += rest[i];
    }
    return v;
}

std::string chat(ChatBackend& backend, const Prompt& prompt) { return backend.chat(prompt); }

// ---------------------------------------------------------------------------
// Mock backend

MockBackend::MockBackend(KnowledgeBase kb, HypothesisState state, int edit_budget)
    : kb_(std::move(kb)), state_(std::move(state)), edit_budget_(edit_budget) {}

PseudoLabel MockBackend::pseudo_from_expression(const SymbolSeq& symbols) {
    PseudoLabel pseudo;
    for (Symbol s : symbols) {
        ProbRow row;
        row.fill(0.05);
        row[static_cast<std::size_t>(s)] = 0.85;
        pseudo.probs.push_back(row);
        pseudo.argmax_symbols.push_back(s);
        pseudo.confidences.push_back(0.85);
    }
    return pseudo;
}

std::string MockBackend::chat(const Prompt& prompt) {
    auto symbols = symbols_from_string(prompt.expression);
    bool consistent = false;
    if (symbols && check_structural(kb_, *symbols).empty()) {
        for (std::uint16_t code : state_.codes()) {
            if (check_consistency(*symbols, OperationTable::from_code(code))) {
                consistent = true;
                break;
            }
        }
    }

    if (prompt.kind == PromptKind::CDP) {
        if (consistent) {
            return "VERDICT: CONSISTENT\nThe expression satisfies the rules and a surviving table.";
        }
        return "VERDICT: INCONSISTENT\nNo surviving table evaluates the expression as written.";
    }

    // RDP: run the oracle on the synthetic pseudo-label.
    std::ostringstream out;
    out << "VERDICT: " << (consistent ? "CONSISTENT" : "INCONSISTENT") << "\n";
    if (symbols) {
        int budget = edit_budget_ > 0 ? edit_budget_ : default_edit_budget(symbols->size());
        auto revision = revise(pseudo_from_expression(*symbols), state_, budget);
        if (revision) {
            out << "CORRECTED: " << symbols_to_string(revision->revised_symbols) << "\n";
            bool standard = false;
            for (std::uint16_t code : revision->supporting_tables) {
                if (code == make_standard_table().code()) standard = true;
            }
            char buf[16];
            std::snprintf(buf, sizeof buf, "%04x", revision->supporting_tables.empty()
                                                       ? 0
                                                       : revision->supporting_tables.front());
            out << "OPERATION: "
                << (standard ? "binary addition with carry" : std::string("digit rule 0x") + buf)
                << "\n";
        } else {
            out << "CORRECTED: " << prompt.expression << "\n";
            out << "OPERATION: unknown\n";
        }
    } else {
        out << "CORRECTED: " << prompt.expression << "\n";
        out << "OPERATION: unknown\n";
    }
    out << "Reasoning: minimal edit consistent with the surviving tables.";
    return out.str();
}

// ---------------------------------------------------------------------------
// Live backend

LiveBackend::LiveBackend(LiveConfig config) : config_(std::move(config)) {
    if (config_.url.empty()) {
        const char* env = std::getenv("CHATABL_API_URL");
        if (env) config_.url = env;
    }
    if (config_.api_key.empty()) {
        const char* env = std::getenv("CHATABL_API_KEY");
        if (env) config_.api_key = env;
    }
    if (config_.url.empty()) {
        throw BackendError("live backend: no URL (set CHATABL_API_URL)");
    }
}

std::string LiveBackend::chat(const Prompt& prompt) {
    // Rate limit admission.
    if (config_.min_interval_ms > 0) {
        auto now_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now().time_since_epoch())
                          .count();
        std::int64_t wait = last_call_ms_ + config_.min_interval_ms - now_ms;
        if (wait > 0) std::this_thread::sleep_for(std::chrono::milliseconds(wait));
        last_call_ms_ = now_ms + std::max<std::int64_t>(wait, 0);
    }

    // Split scheme://host[:port]/path.
    std::string url = config_.url;
    std::string scheme_host = url;
    std::string path = "/";
    auto scheme_end = url.find("://");
    std::size_t path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
        scheme_host = url.substr(0, path_start);
        path = url.substr(path_start);
    }

    nlohmann::json body;
    body["model"] = config_.model;
    body["temperature"] = 0;
    body["max_tokens"] = config_.max_tokens;
    body["messages"] = nlohmann::json::array();
    for (const ChatMessage& m : prompt.messages) {
        body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    const std::string payload = body.dump();

    httplib::Client client(scheme_host);
    client.set_connection_timeout(static_cast<time_t>(config_.timeout_s));
    client.set_read_timeout(static_cast<time_t>(config_.timeout_s));
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    int backoff = config_.backoff_ms;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendError("live backend: status " + std::to_string(res->status) + ": " +
                               res->body);
        }
        try {
            nlohmann::json reply = nlohmann::json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("live backend: malformed response: ") + e.what());
        }
    }
    throw BackendError("live backend: retries exhausted (" + last_error + ")");
}

// ---------------------------------------------------------------------------
// Record / replay

std::string prompt_digest(const Prompt& prompt) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const ChatMessage& m : prompt.messages) {
        feed(role_name(m.role));
        feed("\x1f");
        feed(m.content);
        feed("\x1e");
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ReplayBackend::ReplayBackend(const std::string& cassette_path) {
    std::ifstream in(cassette_path);
    if (!in) throw BackendError("replay backend: cannot read cassette " + cassette_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line);
        replies_[rec.at("prompt_digest").get<std::string>()] = rec.at("reply").get<std::string>();
    }
}

std::string ReplayBackend::chat(const Prompt& prompt) {
    auto it = replies_.find(prompt_digest(prompt));
    if (it == replies_.end()) {
        throw ReplayMiss("replay miss for digest " + prompt_digest(prompt));
    }
    return it->second;
}

RecordingBackend::RecordingBackend(std::unique_ptr<ChatBackend> inner, const std::string& cassette_path)
    : inner_(std::move(inner)), path_(cassette_path) {}

std::string RecordingBackend::chat(const Prompt& prompt) {
    std::string reply = inner_->chat(prompt);
    nlohmann::json rec;
    rec["prompt_digest"] = prompt_digest(prompt);
    nlohmann::json request;
    request["messages"] = nlohmann::json::array();
    for (const ChatMessage& m : prompt.messages) {
        request["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    rec["request"] = request;
    rec["reply"] = reply;
    rec["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
    std::ofstream out(path_, std::ios::app);
    if (!out) throw BackendError("recording backend: cannot append to " + path_);
    out << rec.dump() << "\n";
    return reply;
}

// ---------------------------------------------------------------------------
// Self-feedback loop

namespace {

std::optional<Verdict> chat_and_parse(ChatBackend& backend, const Prompt& prompt, int parse_retries,
                                      LoopState& ls) {
    for (int attempt = 0; attempt <= parse_retries; ++attempt) {
        std::string reply = backend.chat(prompt);
        auto verdict = parse_reply(reply, prompt.kind);
        ls.history.push_back(LoopRecord{prompt, reply, verdict});
        if (verdict) return verdict;
    }
    return std::nullopt;
}

} // namespace

LoopOutcome self_feedback_loop(const std::string& expression, const KnowledgeBase& kb,
                               ChatBackend& backend, int max_iterations, const LoopOptions& options) {
    if (max_iterations < 1) {
        throw std::invalid_argument("self_feedback_loop: max_iterations must be >= 1");
    }
    LoopOutcome outcome;
    LoopState& ls = outcome.loop_state;

    const auto original = symbols_from_string(expression);
    std::string expr = expression;
    for (int iter = 1; iter <= max_iterations; ++iter) {
        ls.iteration = iter;

        Prompt cdp = build_cdp(kb, expr, options.exemplar_k);
        auto verdict = chat_and_parse(backend, cdp, options.parse_retries, ls);
        if (!verdict) {
            throw BackendError("self_feedback_loop: persistent parse failure on CDP reply");
        }

        bool accepted = verdict->consistent;
        if (accepted && options.gated) {
            auto symbols = symbols_from_string(expr);
            accepted = symbols && check_structural(kb, *symbols).empty();
            if (accepted && options.state) {
                accepted = false;
                for (std::uint16_t code : options.state->codes()) {
                    if (check_consistency(*symbols, OperationTable::from_code(code))) {
                        accepted = true;
                        break;
                    }
                }
            }
        }

        if (accepted) {
            ls.status = LoopStatus::Accepted;
            outcome.status = LoopStatus::Accepted;
            RevisionResult result;
            result.revised_symbols = *symbols_from_string(expr);
            result.log_score = 0.0;
            if (original && original->size() == result.revised_symbols.size()) {
                int edits = 0;
                for (std::size_t i = 0; i < original->size(); ++i) {
                    if ((*original)[i] != result.revised_symbols[i]) ++edits;
                }
                result.edits = edits;
            } else {
                result.edits = static_cast<int>(levenshtein(expression, expr));
            }
            if (options.state) {
                for (std::uint16_t code : options.state->codes()) {
                    if (check_consistency(result.revised_symbols, OperationTable::from_code(code))) {
                        result.supporting_tables.push_back(code);
                    }
                }
            }
            for (const LoopRecord& rec : ls.history) {
                std::string kind = rec.prompt.kind == PromptKind::CDP ? "CDP" : "RDP";
                std::string line = kind + " on " + rec.prompt.expression + ": " +
                                   (rec.verdict ? (rec.verdict->consistent ? "consistent" : "inconsistent")
                                                : "unparseable");
                if (rec.verdict && rec.verdict->corrected_expression) {
                    line += ", corrected to " + *rec.verdict->corrected_expression;
                }
                result.trace.push_back(line);
            }
            result.trace.push_back("accepted " + expr + " at iteration " + std::to_string(iter));
            outcome.result = std::move(result);
            return outcome;
        }

        Prompt rdp = build_rdp(kb, expr, options.penalty, options.exemplar_k);
        auto correction = chat_and_parse(backend, rdp, options.parse_retries, ls);
        if (!correction) {
            throw BackendError("self_feedback_loop: persistent parse failure on RDP reply");
        }
        if (correction->corrected_expression) {
            expr = *correction->corrected_expression;
        }
    }

    ls.status = LoopStatus::Exhausted;
    outcome.status = LoopStatus::Exhausted;
    return outcome;
}

} // namespace chatabl
