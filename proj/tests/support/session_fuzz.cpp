#include "session_fuzz.hpp"

#include <fmt/format.h>

#include "generators.hpp"
#include "mscs/protocol.hpp"

namespace mscs::testing {

namespace {

SubManeuver simple_sub(StationId who, Millis start) {
    SubManeuver sub;
    sub.executant_id = who;
    sub.trr = TargetRoadResource::lane(1, 0, 50);
    sub.start_time = start;
    sub.end_time = start + 3000;
    sub.max_speed = 100;
    return sub;
}

}  // namespace

SessionFuzzReport fuzz_sessions(std::uint64_t seed, std::size_t sequences, std::size_t max_steps) {
    Gen gen(seed);
    SessionFuzzReport rep;
    auto violation = [&](std::size_t seq, std::size_t step, const std::string& what) {
        if (rep.violations.size() < 5) rep.violations.push_back(fmt::format("sequence {} step {}: {}", seq, step, what));
        ++rep.violation_count;
    };

    for (std::size_t n = 0; n < sequences; ++n) {
        ManeuverIdAllocator ids;
        const StationId requester{100};
        std::vector<StationId> others;
        const int k = gen.integer(0, 4);
        for (int i = 0; i < k; ++i) others.push_back(StationId{static_cast<std::uint32_t>(200 + i)});
        std::vector<StationId> dests = others;
        if (gen.chance(0.8) || dests.empty()) dests.insert(dests.begin(), requester);

        Maneuver man;
        man.sub_maneuvers.push_back(simple_sub(dests[gen.u64(0, dests.size() - 1)], 3000));
        if (gen.chance(0.3)) man.sub_maneuvers.push_back(simple_sub(dests[gen.u64(0, dests.size() - 1)], 3500));
        auto created = create_request(requester, man, dests, Broadcast{}, 0, ids);
        SessionState s = created.session;

        std::set<StationId> agreed;
        for (const auto& r : s.responses) {
            if (r.agree) agreed.insert(r.responder);
        }
        bool refused = false;
        bool was_active = s.phase == Phase::Active;
        Millis now = 0;

        // a station outside the session, and a second session id, keep the noise realistic
        const StationId stranger{999};
        const std::uint64_t other_session = s.maneuver_id + 1;

        // inputs keep coming after a terminal phase; none of them may move it
        for (std::size_t step = 0; step < max_steps; ++step) {
            ++rep.steps;
            now += gen.u64(0, 800);
            const Phase before = s.phase;
            const int kind = gen.integer(0, 3);
            Transition t{s, std::nullopt};
            bool disagree_from_pending = false;
            StationId responder;
            bool agree = true;

            if (kind == 0) {
                Mscm resp = make_response(StationId{}, created.request, ReasonCode::Agree(), now);
                const double pick = gen.real(0, 1);
                responder = pick < 0.8 && !dests.empty() ? dests[gen.u64(0, dests.size() - 1)] : stranger;
                resp.source_id = responder;
                agree = gen.chance(0.8);
                resp.reason_code = agree ? ReasonCode::Agree() : ReasonCode::Disagree(static_cast<std::uint8_t>(gen.u64(0, 255)));
                if (gen.chance(0.05)) resp.maneuver_id = other_session;
                if (gen.chance(0.03)) resp.msg_type = MscmType::Cancel;
                disagree_from_pending = !agree && before == Phase::AwaitingResponses &&
                                        s.pending.contains(responder) && resp.maneuver_id == s.maneuver_id &&
                                        resp.msg_type == MscmType::Response;
                t = handle_response(s, resp);
                if (!t.rejected && agree) agreed.insert(responder);
            } else if (kind == 1) {
                const bool cancel = gen.chance(0.3);
                std::vector<Mscm> batch;
                const int count = gen.integer(1, 3);
                for (int i = 0; i < count; ++i) {
                    const auto& pool = s.participants;
                    auto it = pool.begin();
                    std::advance(it, gen.u64(0, pool.size() - 1));
                    StationId from = gen.chance(0.9) ? *it : stranger;
                    Mscm msg = make_execution_msg(from, s, cancel && i == 0 ? ExecutionStatus::Cancelled
                                                                           : ExecutionStatus::Completed, now);
                    batch.push_back(msg);
                }
                t = handle_execution_batch(s, batch);
            } else if (kind == 2) {
                std::map<std::uint64_t, SessionState> one{{s.maneuver_id, s}};
                TimerSettings timers;
                expire_sessions(one, now, timers);
                t.state = one.at(s.maneuver_id);
            } else {
                Mscm msg = make_execution_msg(*s.participants.begin(), s, ExecutionStatus::Completed, now);
                t = handle_execution_msg(s, msg);
            }

            const Phase after = t.state.phase;
            if (after != before && !is_allowed_transition(before, after)) {
                violation(n, step, fmt::format("edge {} -> {} is not in the DAG", to_string(before), to_string(after)));
            }
            if (t.rejected && after != before) violation(n, step, "rejected input changed the phase");
            if (refused && after != Phase::Rejected) violation(n, step, "a refusal was not final");
            if (disagree_from_pending && after != Phase::Rejected) {
                violation(n, step, "a single refusal from a pending participant did not reject the session");
            }
            if (disagree_from_pending) refused = true;
            if (after == Phase::Rejected && before != Phase::Rejected && !disagree_from_pending) {
                violation(n, step, "session rejected without a refusal");
            }
            if (after == Phase::Active && !was_active) {
                for (auto d : dests) {
                    if (!agreed.contains(d)) violation(n, step, fmt::format("active without agreement from {}", d.value));
                }
                was_active = true;
            }
            s = t.state;
        }
        ++rep.sequences;
        if (was_active) ++rep.reached_active;
        if (s.phase == Phase::Rejected) ++rep.reached_rejected;
        if (s.phase == Phase::Completed) ++rep.reached_completed;
    }
    return rep;
}

}  // namespace mscs::testing
