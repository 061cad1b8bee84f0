#include "qkdrelay/audit.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "qkdrelay/encoding.hpp"
#include "qkdrelay/error.hpp"

namespace qkdrelay::audit {

using nlohmann::json;

namespace {

bool is_payload(const ChannelMessage& m) {
  return m.kind == MessageKind::Payload_m1 || m.kind == MessageKind::Payload_m2;
}

bool matches_prefix(const KeyRegister& candidate, const KeyRegister& k) {
  return candidate.size() >= k.size() && keycore::truncate(candidate, k.size()) == k;
}

json register_json(const KeyRegister& k) {
  return {{"bits", k.size()}, {"data", encoding::base64_encode(k.bytes())}};
}

KeyRegister register_from_json(const json& j) {
  const auto bytes = encoding::base64_decode(j.at("data").get<std::string>());
  return KeyRegister::from_bytes(bytes, j.at("bits").get<std::size_t>());
}

json message_json(const ChannelMessage& m) {
  return {{"seq", m.seq},
          {"channel", m.channel()},
          {"from", m.from},
          {"to", m.to},
          {"kind", std::string(to_string(m.kind))},
          {"hop", m.hop},
          {"body_bits", m.body.size()},
          {"body", encoding::base64_encode(m.body.bytes())}};
}

ChannelMessage message_from_json(const json& j) {
  ChannelMessage m;
  m.seq = j.at("seq").get<std::uint64_t>();
  m.from = j.at("from").get<std::string>();
  m.to = j.at("to").get<std::string>();
  m.kind = parse_message_kind(j.at("kind").get<std::string>());
  m.hop = j.at("hop").get<int>();
  m.body = KeyRegister::from_bytes(encoding::base64_decode(j.at("body").get<std::string>()),
                                   j.at("body_bits").get<std::size_t>());
  return m;
}

json keys_json(const std::map<std::string, KeyRegister>& keys) {
  json out = json::object();
  for (const auto& [name, k] : keys) out[name] = register_json(k);
  return out;
}

}  // namespace

AdversaryView charlie_view(const SessionTranscript& transcript, std::optional<std::string> node) {
  AdversaryView view;
  view.observer = "charlie";
  view.variant = transcript.variant;
  view.path = transcript.path;
  view.l = transcript.l;
  if (transcript.path.empty()) return view;
  if (!node) {
    if (transcript.path.size() < 3) {
      throw Error(ErrorCode::IncompleteView, "transcript path has no trusted node");
    }
    node = transcript.path[1];
  }
  view.key_holder = *node;
  for (const auto& m : transcript.messages) {
    if (m.from == *node || m.to == *node) view.messages.push_back(m);
  }
  if (const auto* snap = transcript.snapshot(*node)) view.private_keys = snap->keys;
  return view;
}

AdversaryView eve_view(const SessionTranscript& transcript, std::optional<std::string> compromised_location) {
  AdversaryView view;
  view.observer = "eve";
  view.variant = transcript.variant;
  view.path = transcript.path;
  view.l = transcript.l;
  view.messages = transcript.messages;
  if (compromised_location) {
    view.key_holder = *compromised_location;
    if (const auto* snap = transcript.snapshot(*compromised_location)) view.private_keys = snap->keys;
  }
  return view;
}

Reconstruction reconstruct_as_charlie(const AdversaryView& view) {
  if (view.key_holder.empty()) throw Error(ErrorCode::IncompleteView, "view carries no trusted-node keys");
  auto it = std::find_if(view.messages.begin(), view.messages.end(), [&](const ChannelMessage& m) {
    return is_payload(m) && m.to == view.key_holder;
  });
  if (it == view.messages.end()) {
    throw Error(ErrorCode::IncompleteView, "no inbound payload for '" + view.key_holder + "'");
  }
  auto pad = view.private_keys.find("otp_in");
  if (pad == view.private_keys.end()) {
    throw Error(ErrorCode::IncompleteView, "view lacks the inbound one-time pad of '" + view.key_holder + "'");
  }
  if (pad->second.size() != it->body.size()) {
    throw Error(ErrorCode::IncompleteView, "inbound pad and payload lengths disagree");
  }
  return {it->body ^ pad->second, view.variant == Variant::Standard};
}

bool exposes_key(const AdversaryView& view, const KeyRegister& k_ab) {
  if (k_ab.empty()) return false;
  std::vector<const KeyRegister*> bodies;
  for (const auto& m : view.messages) bodies.push_back(&m.body);
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    if (matches_prefix(*bodies[i], k_ab)) return true;
    for (std::size_t j = i + 1; j < bodies.size(); ++j) {
      if (bodies[i]->size() == bodies[j]->size() && matches_prefix(*bodies[i] ^ *bodies[j], k_ab)) return true;
    }
    for (const auto& [name, key] : view.private_keys) {
      if (key.size() == bodies[i]->size() && matches_prefix(*bodies[i] ^ key, k_ab)) return true;
    }
  }
  return false;
}

double eta_direct_kem(const cryptoseal::KemParamSet& params) {
  cryptoseal::validate(params);
  return static_cast<double>(cryptoseal::kKemInputKeyBits) / static_cast<double>(params.ciphertext_bits);
}

double eta_kem_then_aes(std::size_t l) {
  if (l == 0) return 1.0;
  return static_cast<double>(l) / static_cast<double>(keycore::layout(l, keycore::kCipherBlockBits).padded_bits());
}

double final_rate(double r_ac, double r_bc, double eta) {
  const double rates[] = {r_ac, r_bc};
  return final_rate(rates, eta);
}

double final_rate(std::span<const double> hop_rates, double eta) {
  if (hop_rates.empty()) throw Error(ErrorCode::InvalidArgument, "no hop rates given");
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "eta must lie in (0, 1]");
  for (double r : hop_rates) {
    if (!(r >= 0.0)) throw Error(ErrorCode::InvalidArgument, "key rates must be non-negative");
  }
  return eta * *std::min_element(hop_rates.begin(), hop_rates.end());
}

EfficiencyReport measured_eta(std::span<const relay::RelaySession> sessions, std::span<const double> hop_rates_bps) {
  EfficiencyReport report;
  report.hop_rates_bps.assign(hop_rates_bps.begin(), hop_rates_bps.end());
  std::uint64_t analytic_bits = 0;
  bool first = true;
  for (const auto& s : sessions) {
    if (!s.completed()) continue;
    if (first) {
      report.variant = s.variant;
      if (s.kem_params && s.variant == Variant::DirectKem) report.l_ct = s.kem_params->ciphertext_bits;
      if (s.kem_params) report.kem_params = s.kem_params->name;
      first = false;
    } else if (s.variant != report.variant ||
               (s.kem_params ? std::optional<std::string>(s.kem_params->name) : std::nullopt) != report.kem_params) {
      throw Error(ErrorCode::InvalidArgument, "efficiency batches must share one variant and parameter set");
    }
    ++report.sessions;
    report.l += s.l;
    report.p += keycore::layout(s.l, keycore::kKeyBlockBits).blocks;
    for (const auto& [link, bits] : s.bits_consumed_per_link()) report.bits_consumed_per_link[link] += bits;
    analytic_bits += relay::otp_bits_required(s.variant, s.l, s.kem_params.value_or(cryptoseal::KemParamSet::kem512()));
  }
  std::uint64_t consumed = 0;
  for (const auto& [link, bits] : report.bits_consumed_per_link) consumed = std::max(consumed, bits);
  report.eta = consumed == 0 ? 1.0 : static_cast<double>(report.l) / static_cast<double>(consumed);
  report.eta_analytic = analytic_bits == 0 ? 1.0 : static_cast<double>(report.l) / static_cast<double>(analytic_bits);
  if (!report.hop_rates_bps.empty() && report.eta > 0.0) {
    report.r_final_bps = final_rate(report.hop_rates_bps, report.eta);
  }
  return report;
}

std::string format_percent(double eta) {
  const auto hundredths = static_cast<std::int64_t>(std::floor(eta * 10000.0 + 0.5));
  std::string out = std::to_string(hundredths / 100);
  auto frac = hundredths % 100;
  if (frac != 0) {
    out += '.';
    out += static_cast<char>('0' + frac / 10);
    if (frac % 10 != 0) out += static_cast<char>('0' + frac % 10);
  }
  return out + "%";
}

std::vector<EtaTableRow> eta_table(std::span<const cryptoseal::KemParamSet> params) {
  std::vector<EtaTableRow> rows;
  for (const auto& p : params) rows.push_back({"direct-kem", p, eta_direct_kem(p)});
  for (const auto& p : params) rows.push_back({"pqc-secured", p, eta_kem_then_aes()});
  return rows;
}

void write_transcript(std::ostream& out, const SessionTranscript& t) {
  json header = {{"type", "session"},
                 {"session_id", t.session_id},
                 {"variant", std::string(to_string(t.variant))},
                 {"path", t.path},
                 {"l", t.l},
                 {"status", std::string(to_string(t.status))}};
  header["kem_params"] = t.kem_params ? json(*t.kem_params) : json(nullptr);
  out << header.dump() << '\n';
  for (const auto& m : t.messages) {
    auto line = message_json(m);
    line["type"] = "message";
    line["session_id"] = t.session_id;
    out << line.dump() << '\n';
  }
  for (const auto& s : t.snapshots) {
    json line = {{"type", "snapshot"},
                 {"session_id", t.session_id},
                 {"node", s.node_id},
                 {"honesty", std::string(to_string(s.honesty))},
                 {"keys", keys_json(s.keys)}};
    out << line.dump() << '\n';
  }
}

std::vector<SessionTranscript> read_transcripts(std::istream& in) {
  std::vector<SessionTranscript> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "session") {
        SessionTranscript t;
        t.session_id = j.at("session_id").get<std::string>();
        t.variant = parse_variant(j.at("variant").get<std::string>());
        t.path = j.at("path").get<std::vector<std::string>>();
        t.l = j.at("l").get<std::size_t>();
        t.status = parse_status(j.at("status").get<std::string>());
        if (!j.at("kem_params").is_null()) t.kem_params = j.at("kem_params").get<std::string>();
        out.push_back(std::move(t));
        continue;
      }
      if (out.empty() || out.back().session_id != j.at("session_id").get<std::string>()) {
        throw Error(ErrorCode::ParseError, "record does not follow its session header");
      }
      if (type == "message") {
        out.back().messages.push_back(message_from_json(j));
      } else if (type == "snapshot") {
        NodeSnapshot s;
        s.node_id = j.at("node").get<std::string>();
        s.honesty = parse_honesty(j.at("honesty").get<std::string>());
        for (const auto& [name, k] : j.at("keys").items()) s.keys[name] = register_from_json(k);
        out.back().snapshots.push_back(std::move(s));
      } else {
        throw Error(ErrorCode::ParseError, "unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, "transcript line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

json to_json(const AdversaryView& view) {
  json messages = json::array();
  for (const auto& m : view.messages) messages.push_back(message_json(m));
  return {{"observer", view.observer},
          {"key_holder", view.key_holder},
          {"variant", std::string(to_string(view.variant))},
          {"path", view.path},
          {"l", view.l},
          {"messages", messages},
          {"private_keys", keys_json(view.private_keys)}};
}

json to_json(const Reconstruction& r) {
  return {{"derived", register_json(r.derived)}, {"is_final_key", r.is_final_key}};
}

json to_json(const EfficiencyReport& r) {
  json j = {{"variant", std::string(to_string(r.variant))},
            {"sessions", r.sessions},
            {"l", r.l},
            {"p", r.p},
            {"eta", r.eta},
            {"eta_analytic", r.eta_analytic},
            {"eta_percent", format_percent(r.eta)},
            {"bits_consumed_per_link", r.bits_consumed_per_link},
            {"hop_rates_bps", r.hop_rates_bps},
            {"r_AC", r.r_ac()},
            {"r_BC", r.r_bc()},
            {"r_final", r.r_final_bps}};
  j["kem_params"] = r.kem_params ? json(*r.kem_params) : json(nullptr);
  j["l_ct"] = r.l_ct ? json(*r.l_ct) : json(nullptr);
  return j;
}

json session_json(const relay::RelaySession& s) {
  json j = {{"session_id", s.session_id},
            {"variant", std::string(to_string(s.variant))},
            {"path", s.path},
            {"requested_bits", s.requested_bits},
            {"l", s.l},
            {"payload_bits", s.payload_bits},
            {"bits_consumed_per_link", s.bits_consumed_per_link()},
            {"status", std::string(to_string(s.status))}};
  if (s.status == SessionStatus::Aborted) j["abort_reason"] = std::string(relay::to_string(s.abort_reason));
  j["kem_params"] = s.kem_params ? json(s.kem_params->name) : json(nullptr);
  return j;
}

}  // namespace qkdrelay::audit
