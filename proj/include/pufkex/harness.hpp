#pragma once

#include "pufkex/protocol.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pufkex::harness {

enum class ScenarioKind {
    Honest,
    Eavesdrop,
    Tamper,
    Replay,
    Mitm,
    FakeDevice,
    TamperCert,
};

constexpr ScenarioKind kAllScenarios[] = {
    ScenarioKind::Honest, ScenarioKind::Eavesdrop,  ScenarioKind::Tamper,    ScenarioKind::Replay,
    ScenarioKind::Mitm,   ScenarioKind::FakeDevice, ScenarioKind::TamperCert,
};

std::string_view scenarioName(ScenarioKind k);
// "honest", "fake-device", ...; throws InvalidArgument.
ScenarioKind parseScenario(std::string_view name);

struct Scenario
{
    ScenarioKind kind = ScenarioKind::Honest;
    proto::Variant variant = proto::Variant::A;
    // Every other seed (device, noise, TTP, server, attacker) is derived from this one.
    std::uint64_t seed = 1;
    double noise = 0.15;

    // Tamper: which Stage II frame (channel order) and which bit of it.
    std::size_t tamperIndex = 0;
    std::size_t tamperBit = 0;

    // Explicit values win over the ones derived from `seed`.
    std::optional<std::uint64_t> deviceSeed;
    std::optional<std::uint64_t> noiseSeed;
    std::optional<ByteArray<32>> ttpSeed;
    // External certificate store for A/C (for example a RegistryClient); an
    // in-memory registry is used when unset.
    reg::CertStore* cloud = nullptr;

    bool ephemeralUpgrade = false;
    bool strictReconstruct = false;
    bool leakSessionKey = false; // positive control for the eavesdrop audit
};

struct Outcome
{
    Scenario scenario;
    bool confirmed = false;
    bool keysMatch = false;
    std::optional<proto::AbortReason> abortReason;
    std::optional<proto::Party> abortedBy;
    // Set when the interceptor never found the frame it was told to attack.
    bool attackApplied = true;
    std::optional<bool> auditPassed; // eavesdrop only

    std::vector<net::WireEvent> transcript;
    Bytes recorded;
    proto::TransferLog transferLog; // Stage I then Stage II
    proto::SessionSecrets serverSecrets;
    proto::SessionSecrets deviceSecrets;
    std::size_t deviceAmbiguousBlocks = 0;
    std::size_t deviceNvmBits = 0; // right after enrollment
};

// Plain seeds a scenario expands into.
struct WorldSeeds
{
    std::uint64_t deviceSeed;
    std::uint64_t noiseSeed;
    ByteArray<32> ttpSeed;
    ByteArray<32> serverSeed;
    ByteArray<32> attackerSeed;
    std::uint64_t impostorPufSeed;
    ByteArray<32> fallbackRngSeed; // device PRNG when p = 0 leaves no PUF entropy
};

WorldSeeds expandSeed(std::uint64_t seed);
// expandSeed(s.seed) with the scenario's explicit overrides applied.
WorldSeeds scenarioSeeds(const Scenario& s);

Outcome runScenario(const Scenario& s);

// True when no session secret (k, S, x, w from either side) appears in the recorded bytes.
bool eavesdropAudit(const Outcome& outcome);

// Whether the scenario's attack was stopped: honest/eavesdrop scenarios are
// "defended" when they confirm (and, for eavesdrop, pass the audit).
bool defended(const Outcome& outcome);

// One "key: value" pair per line.
std::string formatReport(const Outcome& outcome);

} // namespace pufkex::harness
