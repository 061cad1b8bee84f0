#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qkdrelay/keycore.hpp"

namespace qkdrelay {

using keycore::KeyRegister;

enum class Variant { Standard, PqcSecured, DirectKem };
enum class HonestyLevel { Honest, HonestButCurious, Malicious };
enum class SessionStatus { Running, Completed, Aborted };

enum class MessageKind {
  LengthAnnounce,
  LengthDecision,
  KemPublicKey,
  KemCiphertext,
  NonceAnnounce,
  Payload_m1,
  Payload_m2,
  Abort,
};

std::string_view to_string(Variant v);
std::string_view to_string(HonestyLevel h);
std::string_view to_string(SessionStatus s);
std::string_view to_string(MessageKind k);
// Accept the to_string spellings plus lowercase CLI forms
// ("standard", "pqc-secured", "direct-kem", "honest-but-curious", ...).
Variant parse_variant(std::string_view text);
HonestyLevel parse_honesty(std::string_view text);
MessageKind parse_message_kind(std::string_view text);
SessionStatus parse_status(std::string_view text);

// One message on an authenticated classical channel CC(x, y).
struct ChannelMessage {
  std::uint64_t seq = 0;
  std::string from;
  std::string to;
  MessageKind kind = MessageKind::LengthAnnounce;
  int hop = -1;  // index of the QKD hop a payload travels over, -1 otherwise
  KeyRegister body;

  // "CC(x,y)" with the two node ids in lexicographic order.
  std::string channel() const;
  bool on_channel(std::string_view a, std::string_view b) const;

  friend bool operator==(const ChannelMessage&, const ChannelMessage&) = default;
};

// Keys a node holds at the end of a session.
struct NodeSnapshot {
  std::string node_id;
  HonestyLevel honesty = HonestyLevel::Honest;
  std::map<std::string, KeyRegister> keys;

  friend bool operator==(const NodeSnapshot&, const NodeSnapshot&) = default;
};

// Append-only record of one relay session.
struct SessionTranscript {
  std::string session_id;
  Variant variant = Variant::Standard;
  std::vector<std::string> path;
  std::optional<std::string> kem_params;
  std::size_t l = 0;
  SessionStatus status = SessionStatus::Running;
  std::vector<ChannelMessage> messages;
  std::vector<NodeSnapshot> snapshots;

  const ChannelMessage& send(std::string from, std::string to, MessageKind kind, KeyRegister body, int hop = -1);
  const NodeSnapshot* snapshot(std::string_view node) const;

  friend bool operator==(const SessionTranscript&, const SessionTranscript&) = default;
};

}  // namespace qkdrelay
