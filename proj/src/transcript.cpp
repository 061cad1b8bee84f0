#include "qkdrelay/transcript.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "qkdrelay/error.hpp"

namespace qkdrelay {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view text, const std::array<std::pair<std::string_view, E>, N>& table,
             std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == text) return value;
  }
  throw Error(ErrorCode::ParseError, "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Standard: return "Standard";
    case Variant::PqcSecured: return "PqcSecured";
    case Variant::DirectKem: return "DirectKem";
  }
  return "?";
}

std::string_view to_string(HonestyLevel h) {
  switch (h) {
    case HonestyLevel::Honest: return "Honest";
    case HonestyLevel::HonestButCurious: return "HonestButCurious";
    case HonestyLevel::Malicious: return "Malicious";
  }
  return "?";
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Running: return "Running";
    case SessionStatus::Completed: return "Completed";
    case SessionStatus::Aborted: return "Aborted";
  }
  return "?";
}

std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::LengthAnnounce: return "LengthAnnounce";
    case MessageKind::LengthDecision: return "LengthDecision";
    case MessageKind::KemPublicKey: return "KemPublicKey";
    case MessageKind::KemCiphertext: return "KemCiphertext";
    case MessageKind::NonceAnnounce: return "NonceAnnounce";
    case MessageKind::Payload_m1: return "Payload_m1";
    case MessageKind::Payload_m2: return "Payload_m2";
    case MessageKind::Abort: return "Abort";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  static constexpr std::array<std::pair<std::string_view, Variant>, 9> table{{
      {"Standard", Variant::Standard},
      {"standard", Variant::Standard},
      {"otp", Variant::Standard},
      {"PqcSecured", Variant::PqcSecured},
      {"pqc-secured", Variant::PqcSecured},
      {"pqc", Variant::PqcSecured},
      {"DirectKem", Variant::DirectKem},
      {"direct-kem", Variant::DirectKem},
      {"direct", Variant::DirectKem},
  }};
  return parse_enum(text, table, "variant");
}

HonestyLevel parse_honesty(std::string_view text) {
  static constexpr std::array<std::pair<std::string_view, HonestyLevel>, 7> table{{
      {"Honest", HonestyLevel::Honest},
      {"honest", HonestyLevel::Honest},
      {"HonestButCurious", HonestyLevel::HonestButCurious},
      {"honest-but-curious", HonestyLevel::HonestButCurious},
      {"semi-honest", HonestyLevel::HonestButCurious},
      {"Malicious", HonestyLevel::Malicious},
      {"malicious", HonestyLevel::Malicious},
  }};
  return parse_enum(text, table, "honesty level");
}

MessageKind parse_message_kind(std::string_view text) {
  static constexpr std::array<std::pair<std::string_view, MessageKind>, 8> table{{
      {"LengthAnnounce", MessageKind::LengthAnnounce},
      {"LengthDecision", MessageKind::LengthDecision},
      {"KemPublicKey", MessageKind::KemPublicKey},
      {"KemCiphertext", MessageKind::KemCiphertext},
      {"NonceAnnounce", MessageKind::NonceAnnounce},
      {"Payload_m1", MessageKind::Payload_m1},
      {"Payload_m2", MessageKind::Payload_m2},
      {"Abort", MessageKind::Abort},
  }};
  return parse_enum(text, table, "message kind");
}

SessionStatus parse_status(std::string_view text) {
  static constexpr std::array<std::pair<std::string_view, SessionStatus>, 3> table{{
      {"Running", SessionStatus::Running},
      {"Completed", SessionStatus::Completed},
      {"Aborted", SessionStatus::Aborted},
  }};
  return parse_enum(text, table, "session status");
}

std::string ChannelMessage::channel() const {
  const auto& [lo, hi] = std::minmax(from, to);
  return "CC(" + lo + "," + hi + ")";
}

bool ChannelMessage::on_channel(std::string_view a, std::string_view b) const {
  return (from == a && to == b) || (from == b && to == a);
}

const ChannelMessage& SessionTranscript::send(std::string from, std::string to, MessageKind kind,
                                              KeyRegister body, int hop) {
  ChannelMessage m;
  m.seq = messages.size();
  m.from = std::move(from);
  m.to = std::move(to);
  m.kind = kind;
  m.hop = hop;
  m.body = std::move(body);
  messages.push_back(std::move(m));
  return messages.back();
}

const NodeSnapshot* SessionTranscript::snapshot(std::string_view node) const {
  auto it = std::find_if(snapshots.begin(), snapshots.end(),
                         [&](const NodeSnapshot& s) { return s.node_id == node; });
  return it == snapshots.end() ? nullptr : &*it;
}

}  // namespace qkdrelay
