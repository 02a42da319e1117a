// Single-page UI: query box, ranked result list, pick-to-feedback,
// history pane and session close. All ordering comes from the service;
// the UI never sorts, filters or injects items.

import { QueryItem, ServiceError, SessionInfo } from './api.js';

export interface ClientLike {
    createSession(): Promise<SessionInfo>;
    postQuery(sessionId: string, text: string): Promise<{ query_id: string; items: QueryItem[] }>;
    postFeedback(sessionId: string, queryId: string, apiId: string): Promise<void>;
    closeSession(sessionId: string): Promise<{ model_version: number; retraining: boolean }>;
}

export interface HistoryEntry {
    text: string;
    queryId: string;
    items: QueryItem[];
    picked: string | null;
}

export class App {
    session: SessionInfo | null = null;
    history: HistoryEntry[] = [];
    pending = false;
    closing = false;
    banner = '';
    errorMessage = '';
    private retryAction: (() => Promise<void>) | null = null;

    element: HTMLDivElement;
    private input: HTMLInputElement;
    private submitButton: HTMLButtonElement;
    private endButton: HTMLButtonElement;
    private bannerBox: HTMLDivElement;
    private errorBox: HTMLDivElement;
    private resultsBox: HTMLDivElement;
    private historyBox: HTMLDivElement;

    constructor(private client: ClientLike) {
        this.element = document.createElement('div');
        this.element.setAttribute('class', 'app');

        const form = document.createElement('form');
        form.setAttribute('class', 'query-form');
        this.input = document.createElement('input');
        this.input.setAttribute('class', 'query-input');
        this.input.setAttribute('placeholder', 'Describe what you need, e.g. "killing a running thread"');
        this.submitButton = document.createElement('button');
        this.submitButton.setAttribute('class', 'query-submit');
        this.submitButton.setAttribute('type', 'submit');
        this.submitButton.textContent = 'Search APIs';
        form.appendChild(this.input);
        form.appendChild(this.submitButton);
        form.addEventListener('submit', (event) => {
            event.preventDefault();
            void this.submitQuery(this.input.value);
        });
        this.input.addEventListener('input', () => this.refreshControls());

        this.endButton = document.createElement('button');
        this.endButton.setAttribute('class', 'end-session');
        this.endButton.textContent = 'End session';
        this.endButton.addEventListener('click', () => void this.endSession());

        this.bannerBox = document.createElement('div');
        this.bannerBox.setAttribute('class', 'banner');
        this.errorBox = document.createElement('div');
        this.errorBox.setAttribute('class', 'error-box');
        this.resultsBox = document.createElement('div');
        this.resultsBox.setAttribute('class', 'results');
        this.historyBox = document.createElement('div');
        this.historyBox.setAttribute('class', 'history');

        this.element.appendChild(form);
        this.element.appendChild(this.endButton);
        this.element.appendChild(this.bannerBox);
        this.element.appendChild(this.errorBox);
        this.element.appendChild(this.resultsBox);
        this.element.appendChild(this.historyBox);
        this.refreshControls();
    }

    async start(): Promise<void> {
        try {
            this.session = await this.client.createSession();
            this.errorMessage = '';
        } catch (error) {
            this.showError(error, () => this.start());
        }
        this.renderAll();
    }

    get latest(): HistoryEntry | null {
        return this.history.length ? this.history[this.history.length - 1] : null;
    }

    async submitQuery(text: string): Promise<void> {
        const trimmed = text.trim();
        if (!trimmed || this.pending) {
            return;
        }
        this.pending = true;
        this.refreshControls();
        try {
            if (this.session === null) {
                // previous session ended; a fresh query opens a new one
                this.session = await this.client.createSession();
                this.banner = '';
            }
            const response = await this.client.postQuery(this.session.id, trimmed);
            this.history.push({
                text: trimmed,
                queryId: response.query_id,
                items: response.items,
                picked: null,
            });
            this.errorMessage = '';
            this.retryAction = null;
        } catch (error) {
            this.showError(error, () => this.submitQuery(text));
        } finally {
            this.pending = false;
        }
        this.renderAll();
    }

    async pickApi(queryId: string, apiId: string): Promise<void> {
        const entry = this.history.find((h) => h.queryId === queryId);
        if (!entry || this.session === null) {
            return;
        }
        try {
            await this.client.postFeedback(this.session.id, queryId, apiId);
            entry.picked = apiId;
            this.errorMessage = '';
            this.retryAction = null;
        } catch (error) {
            this.showError(error, () => this.pickApi(queryId, apiId));
        }
        this.renderAll();
    }

    async endSession(): Promise<void> {
        if (this.session === null || this.closing) {
            return;
        }
        this.closing = true;
        this.refreshControls();
        const sessionId = this.session.id;
        try {
            const response = await this.client.closeSession(sessionId);
            this.session = null;
            this.banner = response.retraining
                ? `Session closed; retraining model (next version ${response.model_version}).`
                : 'Session closed; no feedback to learn from.';
            this.errorMessage = '';
            this.retryAction = null;
        } catch (error) {
            this.showError(error, () => {
                this.closing = false;
                return this.endSession();
            });
        } finally {
            this.closing = false;
        }
        this.renderAll();
    }

    private showError(error: unknown, retry: () => Promise<void>): void {
        if (error instanceof ServiceError) {
            this.errorMessage = `${error.code}: ${error.message}`;
        } else {
            this.errorMessage = `network error: ${String(error)}`;
        }
        this.retryAction = retry;
    }

    private refreshControls(): void {
        this.submitButton.disabled = this.pending || !this.input.value.trim();
        this.endButton.disabled = this.closing || this.session === null;
    }

    private renderResults(): void {
        const entry = this.latest;
        this.resultsBox.replaceChildren();
        if (!entry) {
            return;
        }
        const caption = document.createElement('div');
        caption.setAttribute('class', 'results-query');
        caption.textContent = entry.text;
        this.resultsBox.appendChild(caption);
        for (const item of entry.items) {
            const row = document.createElement('div');
            const selected = entry.picked === item.api_id;
            row.setAttribute('class', selected ? 'result-row selected' : 'result-row');
            row.setAttribute('data-api-id', item.api_id);

            const rank = document.createElement('span');
            rank.setAttribute('class', 'result-rank');
            rank.textContent = String(item.rank);
            const path = document.createElement('span');
            path.setAttribute('class', 'result-path');
            path.textContent = item.path;
            const description = document.createElement('span');
            description.setAttribute('class', 'result-description');
            description.textContent = item.description;
            const scoreBadge = document.createElement('span');
            scoreBadge.setAttribute('class', 'result-score');
            scoreBadge.textContent = item.pred_score.toFixed(4);

            row.appendChild(rank);
            row.appendChild(path);
            row.appendChild(scoreBadge);
            row.appendChild(description);
            row.addEventListener('click', () => void this.pickApi(entry.queryId, item.api_id));
            this.resultsBox.appendChild(row);
        }
    }

    private renderHistory(): void {
        this.historyBox.replaceChildren();
        if (!this.history.length) {
            return;
        }
        const title = document.createElement('div');
        title.setAttribute('class', 'history-title');
        title.textContent = 'This session';
        this.historyBox.appendChild(title);
        for (const entry of this.history) {
            const row = document.createElement('div');
            row.setAttribute('class', 'history-row');
            row.textContent = entry.picked
                ? `${entry.text} → ${entry.picked}`
                : entry.text;
            this.historyBox.appendChild(row);
        }
    }

    private renderAll(): void {
        this.bannerBox.textContent = this.banner;
        this.errorBox.replaceChildren();
        if (this.errorMessage) {
            const message = document.createElement('span');
            message.setAttribute('class', 'error-message');
            message.textContent = this.errorMessage;
            this.errorBox.appendChild(message);
            if (this.retryAction) {
                const retry = document.createElement('button');
                retry.setAttribute('class', 'error-retry');
                retry.textContent = 'Retry';
                const action = this.retryAction;
                retry.addEventListener('click', () => void action());
                this.errorBox.appendChild(retry);
            }
        }
        this.renderResults();
        this.renderHistory();
        this.refreshControls();
    }
}
