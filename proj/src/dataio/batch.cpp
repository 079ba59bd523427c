#include "gcnet/dataio/batch.hpp"

#include <algorithm>

namespace gcnet::data {

std::size_t PaddedBatch::valid_count() const {
    std::size_t n = 0;
    for (double v : validity.data()) n += v != 0.0;
    return n;
}

PaddedBatch pad_batch(std::span<const Conversation* const> conversations,
                      std::span<const ConversationMask* const> masks, std::size_t min_length) {
    if (conversations.empty()) throw std::invalid_argument("pad_batch: empty batch");
    if (masks.size() != conversations.size())
        throw std::invalid_argument("pad_batch: " + std::to_string(masks.size()) + " masks for " +
                                    std::to_string(conversations.size()) + " conversations");
    const std::size_t batch = conversations.size();
    const std::size_t modalities = conversations.front()->features.size();
    std::size_t max_len = min_length;
    for (const auto* c : conversations) max_len = std::max(max_len, c->length());

    PaddedBatch out;
    out.max_length = max_len;
    for (std::size_t m = 0; m < modalities; ++m)
        out.features.emplace_back(Shape{batch, max_len, conversations.front()->features[m].cols()});
    out.lambda = Tensor({batch, max_len, modalities});
    out.validity = Tensor({batch, max_len});
    out.labels.assign(batch * max_len, 0);
    out.speakers.assign(batch * max_len, 0);

    for (std::size_t b = 0; b < batch; ++b) {
        const Conversation& conv = *conversations[b];
        const ConversationMask& mask = *masks[b];
        if (conv.features.size() != modalities)
            throw std::invalid_argument("pad_batch: conversation '" + conv.id + "' has a different modality count");
        mask.validate(conv);
        out.ids.push_back(conv.id);
        out.lengths.push_back(conv.length());
        for (std::size_t i = 0; i < conv.length(); ++i) {
            out.validity(b, i) = 1.0;
            out.labels[b * max_len + i] = conv.labels[i];
            out.speakers[b * max_len + i] = conv.speakers[i];
            for (std::size_t m = 0; m < modalities; ++m) {
                out.lambda(b, i, m) = mask.available(i, m) ? 1.0 : 0.0;
                auto src = conv.features[m].row(i);
                std::copy(src.begin(), src.end(), &out.features[m](b, i, 0));
            }
        }
    }
    return out;
}

PaddedBatch pad_batch(std::span<const Conversation> conversations, std::span<const ConversationMask> masks,
                      std::size_t min_length) {
    std::vector<const Conversation*> cs;
    std::vector<const ConversationMask*> ms;
    for (const auto& c : conversations) cs.push_back(&c);
    for (const auto& m : masks) ms.push_back(&m);
    return pad_batch(std::span<const Conversation* const>(cs), std::span<const ConversationMask* const>(ms),
                     min_length);
}

ConversationSlot batch_slot(const PaddedBatch& batch, std::size_t b) {
    if (b >= batch.size()) throw std::out_of_range("batch_slot: index " + std::to_string(b));
    const std::size_t lp = batch.max_length;
    const std::size_t modalities = batch.features.size();
    ConversationSlot slot;
    slot.id = batch.ids[b];
    slot.length = batch.lengths[b];
    slot.padded_length = lp;
    for (std::size_t m = 0; m < modalities; ++m) {
        const std::size_t dm = batch.features[m].shape()[2];
        Tensor f = Tensor::matrix(lp, dm);
        const double* src = batch.features[m].data().data() + b * lp * dm;
        std::copy(src, src + lp * dm, f.data().begin());
        slot.features.push_back(std::move(f));
        std::vector<std::uint8_t> bits(lp);
        for (std::size_t i = 0; i < lp; ++i) bits[i] = batch.lambda(b, i, m) != 0.0;
        slot.lambda.push_back(std::move(bits));
    }
    for (std::size_t i = 0; i < lp; ++i) {
        slot.validity.push_back(batch.validity(b, i));
        slot.labels.push_back(batch.labels[b * lp + i]);
        slot.speakers.push_back(batch.speakers[b * lp + i]);
    }
    return slot;
}

ConversationSlot make_slot(const Conversation& conversation, const ConversationMask& mask) {
    mask.validate(conversation);
    ConversationSlot slot;
    slot.id = conversation.id;
    slot.length = slot.padded_length = conversation.length();
    slot.features = conversation.features;
    slot.lambda = mask.bits;
    slot.validity.assign(conversation.length(), 1.0);
    slot.labels = conversation.labels;
    slot.speakers = conversation.speakers;
    return slot;
}

} // namespace gcnet::data
