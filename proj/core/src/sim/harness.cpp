#include "mscs/sim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <random>

#include "mscs/sim/channel.hpp"

namespace mscs::sim {

namespace {

constexpr Millis kEvidenceRetention = 60000;
constexpr double kLaneClearance = 10.0;  // m of empty target lane an honest requester wants

struct Frame {
    Millis sent_at = 0;
    Millis deliver_at = 0;
    LongTermId sender;
    std::uint64_t seq = 0;
    std::shared_ptr<const Bytes> bytes;
    MessageDigest digest;
    std::vector<std::pair<LongTermId, bool>> recipients;  // (station, dropped)
};

/// A frame as every receiver sees it. Decoding and signature checks are
/// pure functions of the bytes, the directory, the revocation list and the
/// clock, all shared within a tick, so they run once per frame.
struct Parsed {
    std::shared_ptr<const Bytes> bytes;
    MessageDigest digest;
    Millis sent_at = 0;
    bool accepted = false;  // decodable far enough to name a signer, and the signature verifies
    StationId signer;
    std::optional<Bsm> bsm;
    std::optional<DecodeResult> mscm;
    double cost = 0.0;
};

using Delivery = std::shared_ptr<const Parsed>;

struct OwnRequest {
    std::uint64_t id = 0;
    Bytes bytes;
    Millis next_retransmit = 0;
};

struct Execution {
    Millis end = 0;
};

struct AttackSlot {
    const AttackSpec* spec = nullptr;
    AttackState state;
};

using EventKey = std::tuple<DetectorId, StationId, MessageDigest>;

struct Station {
    LongTermId id;
    std::vector<PseudonymCredential> creds;
    StationId pseudo;
    std::vector<AttackSlot> attacks;
    ObserverView view;
    EvidenceStore evidence;
    std::deque<std::pair<Millis, MessageDigest>> evidence_age;
    std::mt19937_64 rng;
    std::mt19937_64 noise_rng;
    ManeuverIdAllocator ids;

    std::set<std::uint64_t> participant;  // sessions with a protocol-level copy
    std::map<std::uint64_t, Bytes> cached_responses;
    std::set<std::uint64_t> agreed;
    std::optional<OwnRequest> outstanding;
    std::uint32_t attempts = 0;
    std::optional<Millis> retry_at;
    Millis next_request_at = std::numeric_limits<Millis>::max();
    std::map<std::uint64_t, Execution> executions;

    std::set<EventKey> seen_events;
    std::set<StationId> flagged;
    std::vector<DetectionEvent> tick_events;

    std::vector<Delivery> inbox;
    std::vector<Mscm> attack_inbox;
    std::map<std::uint64_t, std::vector<std::pair<Mscm, MessageDigest>>> exec_batch;

    bool honest() const { return attacks.empty(); }
    bool owns(StationId s) const {
        return std::any_of(creds.begin(), creds.end(), [s](const auto& c) { return c.station_id == s; });
    }
};

std::string_view cast_name(const CastMode& mode) {
    if (std::holds_alternative<Unicast>(mode)) return "unicast";
    if (std::holds_alternative<Groupcast>(mode)) return "groupcast";
    return "broadcast";
}

Millis round_up(double ms, Millis tick) {
    const auto steps = static_cast<Millis>(std::ceil(std::max(ms, 1.0) / double(tick)));
    return std::max<Millis>(steps, 1) * tick;
}

KnownSession know(const Mscm& req, int requester_lane, double lane_width) {
    KnownSession ks;
    ks.state = session_from_request(req);
    ks.requester_lane = requester_lane;
    for (const auto& sub : ks.state.maneuver.sub_maneuvers) {
        ks.regions.push_back(spacetime::resolve(sub, requester_lane, lane_width));
        const auto* seg = std::get_if<LaneSegment>(&sub.trr.location);
        ks.target_lanes.push_back(seg ? requester_lane + seg->lane_offset : -1);
    }
    return ks;
}

class Simulation {
public:
    explicit Simulation(const ScenarioConfig& cfg)
        : cfg_(cfg), world_(cfg.map, initial_vehicles(cfg)), loss_(cfg.channel.loss_prob, mix_seed(cfg.seed, 0)) {
        const Millis valid_to = cfg.duration_ms + 3600000;
        std::vector<VehicleConfig> sorted = cfg.vehicles;
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
        for (const auto& v : sorted) {
            Station st;
            st.id = v.id;
            for (std::uint32_t i = 0; i < v.credentials; ++i) {
                auto cred = derive_credential(v.id, i, valid_to, v.is_special);
                directory_.add(cred);
                owner_[cred.station_id] = v.id;
                st.creds.push_back(cred);
            }
            st.pseudo = st.creds.front().station_id;
            st.rng.seed(mix_seed(cfg.seed, v.id.value));
            st.noise_rng.seed(mix_seed(cfg.seed ^ 0x6e6f697365ULL, v.id.value));
            stations_.push_back(std::move(st));
        }
        for (const auto& spec : cfg.attacks) find(spec.attacker)->attacks.push_back({&spec, {}});
        for (auto& st : stations_) {
            st.view.self = st.pseudo;
            st.view.map = cfg.map;
            st.view.directory = &directory_;
            st.next_request_at = draw_request_time(st, 0);
        }
    }

    RunResult run() {
        for (const auto& spec : cfg_.attacks) {
            AttributionRecord r;
            r.what = "declared";
            r.attack = spec.id;
            r.attacker = spec.attacker.value;
            result_.attribution.append(std::move(r));
        }
        for (Millis t = 0; t <= cfg_.duration_ms; t += cfg_.tick_ms) {
            tick(t);
            ++tick_;
        }
        result_.metrics = compute_metrics(result_.log, result_.attribution, {cfg_.timers.response_timeout});
        return std::move(result_);
    }

private:
    static std::vector<VehicleState> initial_vehicles(const ScenarioConfig& cfg) {
        std::vector<VehicleState> out;
        for (const auto& v : cfg.vehicles) {
            VehicleState s;
            s.long_term = v.id;
            s.lane = v.lane;
            s.s = v.s;
            s.speed = v.speed;
            s.width = v.width;
            s.length = v.length;
            s.is_special = v.is_special;
            out.push_back(s);
        }
        return out;
    }

    Station* find(LongTermId id) {
        auto it = std::lower_bound(stations_.begin(), stations_.end(), id,
                                   [](const Station& s, LongTermId v) { return s.id < v; });
        return it != stations_.end() && it->id == id ? &*it : nullptr;
    }

    void log(RecordBody body) { result_.log.append(tick_, now_, std::move(body)); }

    // ---- tick stages -------------------------------------------------------

    void tick(Millis t) {
        if (t > 0) world_.step(cfg_.tick_ms);
        now_ = t;
        if (cfg_.trace_kinematics) {
            for (const auto& v : world_.vehicles()) {
                log(KinematicsRec{v.long_term.value, v.lane, v.s, v.speed, v.lateral(cfg_.map.lane_width, t)});
            }
        }
        if (t % kBeaconInterval == 0) emit_beacons();
        deliver();
        for (auto& st : stations_) process(st);
        for (auto& st : stations_) report(st);
        apply_revocations();
        if (t % 1000 == 0) {
            for (auto& st : stations_) prune(st);
        }
    }

    void emit_beacons() {
        std::vector<PseudonymCredential> fronts;
        for (auto& st : stations_) {
            fronts.push_back(st.creds.front());
            PerceptionNoise noise{cfg_.perception_noise, &st.noise_rng};
            st.view.perception[now_] = perceive(world_, st.id, cfg_.detectors.perception_range, noise);
        }
        for (const auto& b : emit_bsms(world_, now_, fronts)) {
            send(*find(owner_.at(b.source_id)), encode_bsm(b), Broadcast{}, b.source_id);
        }
    }

    std::optional<LongTermId> owner_of(StationId s) const {
        auto it = owner_.find(s);
        if (it == owner_.end()) return std::nullopt;
        return it->second;
    }

    MessageDigest send(Station& st, Bytes bytes, const CastMode& mode, StationId signer) {
        const OwnerLookup lookup = [this](StationId s) { return owner_of(s); };
        const bool overhear = cfg_.channel.overhear && std::holds_alternative<Unicast>(mode);
        auto heard = resolve_recipients(overhear ? CastMode{Broadcast{}} : mode, world_, st.id, cfg_.channel.range_m,
                                        lookup);
        Frame f;
        f.sent_at = now_;
        f.deliver_at = now_ + cfg_.channel.latency_ms;
        f.sender = st.id;
        f.seq = next_seq_++;
        f.digest = MessageDigest::of(bytes);
        for (auto r : heard) f.recipients.emplace_back(r, loss_.drop());

        MsgSent rec;
        rec.station = st.id.value;
        rec.signer = signer.value;
        rec.cast = std::string(cast_name(mode));
        rec.msg = f.digest;
        rec.recipients = static_cast<std::uint32_t>(heard.size());
        if (looks_like_bsm(bytes)) {
            rec.msg_type = "BSM";
        } else if (auto d = decode(bytes)) {
            rec.msg_type = std::string(to_string(d.value().msg_type));
            rec.maneuver_id = d.value().maneuver_id;
        } else {
            rec.msg_type = "Undecodable";
        }
        rec.bytes = bytes;
        log(std::move(rec));

        f.bytes = std::make_shared<const Bytes>(std::move(bytes));
        const auto digest = f.digest;
        in_flight_.push_back(std::move(f));
        return digest;
    }

    MessageDigest send_mscm(Station& st, const Mscm& unsigned_msg, const CastMode& mode) {
        return send(st, seal(st, unsigned_msg), mode, st.pseudo);
    }

    Bytes seal(const Station& st, Mscm m) const {
        m.signature.signer_id = st.pseudo;
        m.signature = sign(signing_payload(m), st.creds.front(), now_);
        return encode(m);
    }

    void deliver() {
        std::vector<Frame> due;
        for (auto it = in_flight_.begin(); it != in_flight_.end();) {
            if (it->deliver_at <= now_) {
                due.push_back(std::move(*it));
                it = in_flight_.erase(it);
            } else {
                ++it;
            }
        }
        std::sort(due.begin(), due.end(),
                  [](const Frame& a, const Frame& b) { return std::tie(a.sender, a.seq) < std::tie(b.sender, b.seq); });
        for (const auto& f : due) {
            std::shared_ptr<const Parsed> parsed;
            for (const auto& [to, dropped] : f.recipients) {
                if (dropped) {
                    log(MsgDropped{to.value, f.digest, f.sent_at});
                    continue;
                }
                if (!parsed) parsed = parse(f);
                log(MsgDelivered{to.value, f.digest, f.sent_at, parsed->cost});
                find(to)->inbox.push_back(parsed);
            }
        }
    }

    std::shared_ptr<const Parsed> parse(const Frame& f) const {
        auto p = std::make_shared<Parsed>();
        p->bytes = f.bytes;
        p->digest = f.digest;
        p->sent_at = f.sent_at;
        const Bytes& bytes = *f.bytes;
        if (looks_like_bsm(bytes)) {
            p->bsm = decode_bsm(bytes);
            if (p->bsm) {
                p->signer = p->bsm->source_id;
                p->accepted = verified(p->signer, bsm_signing_payload(*p->bsm), p->bsm->signature);
            }
            return p;
        }
        p->mscm = decode(bytes);
        const auto& d = *p->mscm;
        const std::size_t subs = d && d.value().maneuver ? d.value().maneuver->sub_maneuvers.size() : 0;
        p->cost = cfg_.cost_c0 + cfg_.cost_c1 * double(subs);
        if (auto view = peek_signed(bytes)) {
            p->signer = view->signature.signer_id;
            p->accepted = verified(p->signer, view->body, view->signature) && (!d || d.value().source_id == p->signer);
        }
        return p;
    }

    // ---- per-station processing -------------------------------------------

    void process(Station& st) {
        auto inbox = std::move(st.inbox);
        st.inbox.clear();
        for (const auto& d : inbox) receive(st, d);
        for (auto& [id, batch] : st.exec_batch) apply_execution(st, id, batch);
        st.exec_batch.clear();
        if (!st.honest()) {
            run_attacks(st);
            return;
        }
        expire(st);
        retransmit(st);
        executions(st);
        maybe_request(st);
    }

    void remember(Station& st, const MessageDigest& d, std::shared_ptr<const Bytes> bytes) {
        if (st.evidence.find(d)) return;
        st.evidence.put(d, bytes);
        st.evidence_age.emplace_back(now_, d);
    }

    void commit(Station& st, std::vector<DetectionEvent> events) {
        for (auto& e : events) {
            if (st.owns(e.suspect)) continue;
            if (!st.seen_events.insert({e.detector, e.suspect, e.message_ref}).second) continue;
            st.flagged.insert(e.suspect);
            log(DetectionRec{st.id.value, st.pseudo.value, e});
            st.tick_events.push_back(std::move(e));
        }
    }

    bool verified(StationId signer, ByteView payload, const SignatureEnvelope& env) const {
        return env.signer_id == signer && verify(env, payload, directory_, crl_, now_).accepted;
    }

    void receive(Station& st, const Delivery& d) {
        if (!d->accepted || st.owns(d->signer)) return;
        remember(st, d->digest, d->bytes);
        if (d->bsm) {
            const Bsm& bsm = *d->bsm;
            st.view.heard[bsm.source_id].emplace_back(bsm.timestamp, d->digest);
            if (st.honest()) commit(st, run_detectors(BsmInput{&bsm, d->digest}, st.view, cfg_.detectors, now_));
            st.view.bsms[bsm.source_id].emplace_back(bsm, d->digest);
            return;
        }
        const StationId signer = d->signer;
        const auto& decoded = *d->mscm;
        if (!decoded) {
            st.view.heard[signer].emplace_back(d->sent_at, d->digest);
            if (st.honest()) {
                commit(st, run_detectors(UndecodableInput{decoded.error(), signer, d->digest}, st.view, cfg_.detectors,
                                         now_));
            }
            return;
        }
        const Mscm& m = decoded.value();
        const MessageDigest& digest = d->digest;
        st.view.heard[signer].emplace_back(m.msg_timestamp, digest);
        const bool addressed = std::any_of(m.destination_ids.begin(), m.destination_ids.end(),
                                           [&](StationId s) { return st.owns(s); });
        if (st.honest() && (addressed || cfg_.detectors.spectators_inspect || m.msg_type != MscmType::Request)) {
            commit(st, run_detectors(MscmInput{&m, digest}, st.view, cfg_.detectors, now_));
        }
        st.view.mscms.push_back({m, digest, now_});

        switch (m.msg_type) {
            case MscmType::Request: on_request(st, m, digest, addressed); break;
            case MscmType::Response: on_response(st, m, digest); break;
            case MscmType::Cancel:
            case MscmType::Complete: st.exec_batch[m.maneuver_id].emplace_back(m, digest); break;
            case MscmType::SpecialAnnounce:
                // Yielding is not modelled; an announce from an ordinary vehicle
                // is already visible to the plausibility checks.
                break;
        }
    }

    void on_request(Station& st, const Mscm& m, const MessageDigest& digest, bool addressed) {
        const bool fresh = !st.view.sessions.contains(m.maneuver_id);
        const int requester_lane = st.view.lane_of(m.source_id, m.msg_timestamp).value_or(0);
        if (fresh && st.honest()) {
            st.view.received_requests.insert(m.maneuver_id);
            st.view.sessions.emplace(m.maneuver_id, know(m, requester_lane, cfg_.map.lane_width));
            if (addressed) st.participant.insert(m.maneuver_id);
        }
        if (!addressed) return;

        if (!st.honest()) {
            attacker_request(st, m, requester_lane);
            return;
        }
        if (auto cached = st.cached_responses.find(m.maneuver_id); cached != st.cached_responses.end()) {
            send(st, cached->second, Broadcast{}, st.pseudo);
            return;
        }
        AgreementPolicy policy;
        policy.lane_width = cfg_.map.lane_width;
        policy.prefilter = [&](const Mscm& req) -> std::optional<std::uint8_t> {
            if (!screen_request(req, digest, st.view, cfg_.detectors, now_)) return std::nullopt;
            st.view.flagged_requests.insert(req.maneuver_id);
            return disagree::kImplausible;
        };
        const Mscm resp = handle_request(own_plan(st), m, policy, {st.pseudo, requester_lane}, now_);
        Bytes bytes = seal(st, resp);
        const auto resp_digest = send(st, bytes, Broadcast{}, st.pseudo);
        st.cached_responses.emplace(m.maneuver_id, std::move(bytes));
        if (resp.reason_code->agree) st.agreed.insert(m.maneuver_id);
        apply_response(st, resp, resp_digest);
    }

    void attacker_request(Station& st, const Mscm& m, int requester_lane) {
        const bool response_attack = std::any_of(st.attacks.begin(), st.attacks.end(), [&](const AttackSlot& a) {
            return is_response_attack(a.spec->id) && now_ >= Millis(a.spec->param("start_ms"));
        });
        if (response_attack) {
            st.attack_inbox.push_back(m);
            return;
        }
        answer_honestly(st, m, requester_lane);
    }

    void answer_honestly(Station& st, const Mscm& m, int requester_lane) {
        if (auto cached = st.cached_responses.find(m.maneuver_id); cached != st.cached_responses.end()) {
            send(st, cached->second, Broadcast{}, st.pseudo);
            return;
        }
        AgreementPolicy policy;
        policy.lane_width = cfg_.map.lane_width;
        Bytes bytes = seal(st, handle_request({}, m, policy, {st.pseudo, requester_lane}, now_));
        send(st, bytes, Broadcast{}, st.pseudo);
        st.cached_responses.emplace(m.maneuver_id, std::move(bytes));
    }

    void on_response(Station& st, const Mscm& m, const MessageDigest& digest) {
        if (!st.honest()) return;
        auto& view = st.view;
        if (view.received_requests.contains(m.maneuver_id) && !view.flagged_requests.contains(m.maneuver_id) &&
            m.reason_code) {
            StationId requester = m.destination_ids.empty() ? StationId{} : m.destination_ids.front();
            if (auto it = view.sessions.find(m.maneuver_id); it != view.sessions.end()) {
                requester = it->second.state.requester;
            }
            view.responses.push_back({m.msg_timestamp, m.source_id, requester, m.maneuver_id, m.reason_code->agree,
                                      digest});
        }
        apply_response(st, m, digest);
    }

    void apply_response(Station& st, const Mscm& m, const MessageDigest& digest) {
        auto it = st.view.sessions.find(m.maneuver_id);
        if (it == st.view.sessions.end()) return;
        auto t = handle_response(it->second.state, m);
        if (t.rejected) return;
        const bool conflict = m.reason_code && !m.reason_code->agree && m.reason_code->code == disagree::kOwnPlanConflict;
        transition(st, it->second, std::move(t.state), digest, conflict);
    }

    void apply_execution(Station& st, std::uint64_t id, const std::vector<std::pair<Mscm, MessageDigest>>& batch) {
        if (!st.honest()) return;
        auto it = st.view.sessions.find(id);
        if (it == st.view.sessions.end()) return;
        std::vector<Mscm> msgs;
        for (const auto& [m, d] : batch) msgs.push_back(m);
        auto t = handle_execution_batch(it->second.state, msgs);
        if (t.rejected || t.state.phase == it->second.state.phase) {
            if (!t.rejected) it->second.state = std::move(t.state);
            return;
        }
        // Cancels win, so the cause is the first Cancel when there is one.
        const MessageDigest* cause = &batch.front().second;
        for (const auto& [m, d] : batch) {
            if (m.msg_type == MscmType::Cancel) {
                cause = &d;
                break;
            }
        }
        transition(st, it->second, std::move(t.state), *cause, false);
    }

    /// Moves a known session to a new state, logging participant transitions
    /// and triggering the station's follow-up behaviour.
    void transition(Station& st, KnownSession& ks, SessionState next, std::optional<MessageDigest> cause,
                    bool conflict) {
        const Phase from = ks.state.phase;
        ks.state = std::move(next);
        const Phase to = ks.state.phase;
        if (to == Phase::Active) ks.was_active = true;
        if (from == to) return;
        const auto id = ks.state.maneuver_id;
        if (!st.participant.contains(id)) return;
        log(SessionTransitionRec{st.id.value, id, from, to, cause});
        if (to == Phase::Active) begin_execution(st, ks);
        if (st.outstanding && st.outstanding->id == id) {
            st.outstanding.reset();
            if (to == Phase::Rejected || to == Phase::Expired) schedule_retry(st, conflict);
            else st.attempts = 0;
        }
        if (is_terminal(to)) st.executions.erase(id);
    }

    std::vector<Reservation> own_plan(const Station& st) const {
        std::vector<Reservation> plan;
        for (const auto& [id, ks] : st.view.sessions) {
            if (!st.participant.contains(id) || is_terminal(ks.state.phase)) continue;
            if (!ks.state.executants.contains(st.pseudo)) continue;
            if (ks.state.requester != st.pseudo && !st.agreed.contains(id)) continue;
            const auto& subs = ks.state.maneuver.sub_maneuvers;
            for (std::size_t i = 0; i < subs.size(); ++i) {
                if (subs[i].executant_id == st.pseudo) plan.push_back({id, ks.regions[i]});
            }
        }
        return plan;
    }

    void begin_execution(Station& st, const KnownSession& ks) {
        const auto id = ks.state.maneuver_id;
        if (!ks.state.executants.contains(st.pseudo)) return;
        if (ks.state.requester != st.pseudo && !st.agreed.contains(id)) return;
        const auto& subs = ks.state.maneuver.sub_maneuvers;
        bool ok = true;
        Millis end = 0;
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (subs[i].executant_id != st.pseudo) continue;
            end = std::max(end, subs[i].end_time);
            const int target = ks.target_lanes[i];
            ok = ok && target >= 0 && subs[i].start_time >= now_ &&
                 world_.start_lane_change(st.id, target, subs[i].start_time);
        }
        if (!ok) {
            finish(st, id, ExecutionStatus::Cancelled);
            return;
        }
        st.executions[id] = {end};
    }

    /// Sends Complete or Cancel to the other participants and applies it locally.
    void finish(Station& st, std::uint64_t id, ExecutionStatus status) {
        auto it = st.view.sessions.find(id);
        if (it == st.view.sessions.end()) return;
        Mscm msg = make_execution_msg(st.pseudo, it->second.state, status, now_);
        std::optional<MessageDigest> digest;
        if (!msg.destination_ids.empty()) digest = send_mscm(st, msg, Broadcast{});
        auto t = handle_execution_msg(it->second.state, msg);
        if (!t.rejected) transition(st, it->second, std::move(t.state), digest, false);
    }

    void executions(Station& st) {
        std::vector<std::uint64_t> done;
        for (const auto& [id, ex] : st.executions) {
            if (now_ >= ex.end) done.push_back(id);
        }
        for (auto id : done) {
            st.executions.erase(id);
            finish(st, id, ExecutionStatus::Completed);
        }
    }

    void expire(Station& st) {
        for (auto& [id, ks] : st.view.sessions) {
            const auto& cur = ks.state;
            const bool due = (cur.phase == Phase::AwaitingResponses && now_ > cur.created_at + cfg_.timers.response_timeout) ||
                             (cur.phase == Phase::Active && now_ > cur.earliest_start() + cfg_.timers.start_grace);
            if (!due) continue;
            std::map<std::uint64_t, SessionState> one{{id, ks.state}};
            for (const auto& e : expire_sessions(one, now_, cfg_.timers)) {
                auto next = std::move(one.at(id));
                if (e.to == Phase::Expired && ks.state.requester == st.pseudo) {
                    commit(st, run_detectors(ExpiredSessionInput{&next, cfg_.timers.response_timeout}, st.view,
                                             cfg_.detectors, now_));
                }
                transition(st, ks, std::move(next), std::nullopt, false);
            }
        }
    }

    void retransmit(Station& st) {
        if (!st.outstanding || now_ < st.outstanding->next_retransmit) return;
        send(st, st.outstanding->bytes, Broadcast{}, st.pseudo);
        st.outstanding->next_retransmit = now_ + cfg_.requests.retransmit_ms;
    }

    void schedule_retry(Station& st, bool conflict) {
        const auto& rq = cfg_.requests;
        if (st.attempts >= rq.max_retries) {
            st.attempts = 0;
            return;
        }
        ++st.attempts;
        const Millis lo = conflict ? rq.conflict_backoff_min_ms : rq.backoff_min_ms;
        const Millis hi = conflict ? rq.conflict_backoff_max_ms : rq.backoff_max_ms;
        std::uniform_int_distribution<Millis> backoff(lo, hi);
        st.retry_at = now_ + round_up(double(backoff(st.rng)), cfg_.tick_ms);
    }

    Millis draw_request_time(Station& st, Millis from) {
        if (!st.honest() || cfg_.requests.rate_per_min <= 0) return std::numeric_limits<Millis>::max();
        std::exponential_distribution<double> gap(cfg_.requests.rate_per_min / 60000.0);
        return from + round_up(gap(st.rng), cfg_.tick_ms);
    }

    void maybe_request(Station& st) {
        if (st.retry_at && now_ >= *st.retry_at) {
            st.retry_at.reset();
            if (!st.outstanding && !try_request(st)) st.attempts = 0;
            return;
        }
        if (now_ < st.next_request_at) return;
        st.next_request_at = draw_request_time(st, now_);
        if (st.outstanding || st.retry_at) return;
        try_request(st);
    }

    bool try_request(Station& st) {
        const auto* v = world_.find(st.id);
        if (v->lane_change || !st.executions.empty() || st.view.perception.empty()) return false;
        for (const auto& [id, ks] : st.view.sessions) {
            if (ks.state.requester == st.pseudo && !is_terminal(ks.state.phase)) return false;
        }
        const auto& snap = st.view.perception.rbegin()->second;
        std::vector<int> offsets;
        for (int off : {1, -1}) {
            if (lane_exists(cfg_.map, v->lane, off)) offsets.push_back(off);
        }
        if (offsets.size() == 2 && std::bernoulli_distribution(0.5)(st.rng)) std::swap(offsets[0], offsets[1]);
        const auto remembered = st.view.remembered_trrs();
        for (int off : offsets) {
            const int lane = v->lane + off;
            const bool free = std::none_of(snap.observed.begin(), snap.observed.end(), [&](const ObservedVehicle& o) {
                return o.lane == lane && std::abs(o.s - v->s) < kLaneClearance;
            });
            if (!free) continue;
            auto sub = lane_change_sub(*v, st.pseudo, off, now_, cfg_.requests.lead_ms);
            const auto region = spacetime::resolve(sub, v->lane, cfg_.map.lane_width);
            const bool clash = std::any_of(remembered.begin(), remembered.end(), [&](const RememberedTrr& r) {
                return spacetime::regions_overlap(region, r.region);
            });
            if (clash) continue;

            std::vector<StationId> dest{st.pseudo};
            for (const auto& [id, list] : st.view.bsms) {
                if (list.empty() || list.back().first.timestamp + cfg_.requests.neighbour_horizon_ms < now_) continue;
                if (st.flagged.contains(id) || crl_.contains(id)) continue;
                dest.push_back(id);
            }
            std::sort(dest.begin(), dest.end());
            auto created = create_request(st.pseudo, Maneuver{{sub}}, dest, Broadcast{}, now_, st.ids);
            Bytes bytes = seal(st, created.request);
            const auto digest = send(st, bytes, Broadcast{}, st.pseudo);
            remember(st, digest, std::make_shared<const Bytes>(bytes));
            const auto id = created.request.maneuver_id;
            auto ks = know(created.request, v->lane, cfg_.map.lane_width);
            ks.state = created.session;
            st.view.received_requests.insert(id);
            st.participant.insert(id);
            st.outstanding = OwnRequest{id, std::move(bytes), now_ + cfg_.requests.retransmit_ms};
            auto& stored = st.view.sessions.insert_or_assign(id, std::move(ks)).first->second;
            if (stored.state.phase == Phase::Active) {
                stored.was_active = true;
                log(SessionTransitionRec{st.id.value, id, Phase::AwaitingResponses, Phase::Active, digest});
                st.outstanding.reset();
                st.attempts = 0;
                begin_execution(st, stored);
            }
            return true;
        }
        return false;
    }

    // ---- attackers -----------------------------------------------------------

    AttackerContext attacker_context(Station& st) {
        AttackerContext ctx;
        ctx.map = &cfg_.map;
        ctx.self = world_.find(st.id);
        ctx.perception = st.view.perception.empty() ? nullptr : &st.view.perception.rbegin()->second;
        ctx.credentials = &st.creds;
        for (const auto& [id, list] : st.view.bsms) {
            if (!list.empty()) ctx.neighbours.push_back(list.back().first);
        }
        for (const auto& other : stations_) ctx.targets[other.id.value] = other.pseudo;
        ctx.ids = &st.ids;
        ctx.rng = &st.rng;
        return ctx;
    }

    void attribute(const AttackSlot& slot, const std::string& what, std::optional<MessageDigest> msg,
                   std::uint64_t maneuver_id, std::string label) {
        AttributionRecord r;
        r.tick = tick_;
        r.t_ms = now_;
        r.what = what;
        r.attack = slot.spec->id;
        r.attacker = slot.spec->attacker.value;
        r.msg = msg;
        r.maneuver_id = maneuver_id;
        r.label = std::move(label);
        result_.attribution.append(std::move(r));
    }

    void run_attacks(Station& st) {
        auto ctx = attacker_context(st);
        std::vector<Mscm> inbox = std::move(st.attack_inbox);
        st.attack_inbox.clear();
        std::set<std::uint64_t> handled;
        for (auto& slot : st.attacks) {
            const bool responder = is_response_attack(slot.spec->id);
            if (responder) {
                if (inbox.empty()) continue;
                for (const auto& m : inbox) ctx.inbox.push_back(&m);
            }
            auto actions = inject(*slot.spec, ctx, slot.state, now_);
            ctx.inbox.clear();
            for (auto& a : actions) {
                if (auto* tx = std::get_if<Transmit>(&a)) {
                    std::uint64_t mid = 0;
                    if (!tx->beacon) {
                        if (auto d = decode(tx->bytes)) mid = d.value().maneuver_id;
                    }
                    const auto digest = send(st, std::move(tx->bytes), tx->mode, tx->signer);
                    attribute(slot, "transmit", digest, mid, tx->label);
                } else {
                    const auto& s = std::get<Suppress>(a);
                    attribute(slot, "suppress", std::nullopt, s.maneuver_id, "silence");
                }
            }
            if (responder) {
                for (const auto& m : inbox) {
                    if (slot.state.answered.contains(m.maneuver_id)) handled.insert(m.maneuver_id);
                }
            }
        }
        // Requests no response attack chose to act on get an ordinary answer.
        for (const auto& m : inbox) {
            if (handled.contains(m.maneuver_id)) continue;
            answer_honestly(st, m, st.view.lane_of(m.source_id, m.msg_timestamp).value_or(0));
        }
    }

    // ---- reports and revocation ---------------------------------------------

    void report(Station& st) {
        if (st.tick_events.empty()) return;
        std::map<StationId, std::vector<DetectionEvent>> by_suspect;
        for (auto& e : st.tick_events) by_suspect[e.suspect].push_back(std::move(e));
        st.tick_events.clear();
        for (const auto& [suspect, events] : by_suspect) {
            MisbehaviorReport r;
            try {
                r = generate_report(st.pseudo, events, st.evidence, now_);
            } catch (const MissingEvidence&) {
                continue;
            }
            ReportRec rec;
            rec.station = st.id.value;
            rec.reporter = st.pseudo.value;
            rec.suspect = suspect.value;
            rec.events = static_cast<std::uint32_t>(r.events.size());
            for (const auto& b : r.included_messages) rec.messages.push_back(MessageDigest::of(b));
            rec.revoke_at = now_ + cfg_.revocation_delay_ms;
            revocations_.emplace(rec.revoke_at, suspect);
            log(std::move(rec));
        }
    }

    void apply_revocations() {
        while (!revocations_.empty() && revocations_.begin()->first <= now_) {
            crl_ = revoke(std::move(crl_), revocations_.begin()->second);
            revocations_.erase(revocations_.begin());
        }
    }

    void prune(Station& st) {
        st.view.prune(now_, cfg_.detectors);
        while (!st.evidence_age.empty() && st.evidence_age.front().first + kEvidenceRetention < now_) {
            st.evidence.evict(st.evidence_age.front().second);
            st.evidence_age.pop_front();
        }
        std::erase_if(st.participant, [&](std::uint64_t id) { return !st.view.sessions.contains(id); });
        std::erase_if(st.agreed, [&](std::uint64_t id) { return !st.view.sessions.contains(id); });
        if (st.honest()) {
            std::erase_if(st.cached_responses, [&](const auto& kv) { return !st.view.sessions.contains(kv.first); });
        }
    }

    const ScenarioConfig& cfg_;
    World world_;
    LossStream loss_;
    CredentialDirectory directory_;
    RevocationList crl_;
    std::map<StationId, LongTermId> owner_;
    std::vector<Station> stations_;  // sorted by long-term id
    std::deque<Frame> in_flight_;
    std::multimap<Millis, StationId> revocations_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t tick_ = 0;
    Millis now_ = 0;
    RunResult result_;
};

}  // namespace

RunResult run(const ScenarioConfig& config) {
    validate(config);
    Simulation sim(config);
    return sim.run();
}

}  // namespace mscs::sim
