import { ServiceClient } from './api.js';
import { App } from './app.js';

window.addEventListener('DOMContentLoaded', () => {
    const root = document.getElementById('app');
    if (!root) {
        throw new Error('missing #app mount point');
    }
    const app = new App(new ServiceClient(''));
    root.replaceChildren(app.element);
    void app.start();
});
